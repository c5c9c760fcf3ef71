use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("xml parse error at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("unknown judgment `{0}` (expected one of Y, N, Q, U)")]
    UnknownJudgment(String),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown concept `{0}`")]
    Lookup(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing predictions for {} record(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}
