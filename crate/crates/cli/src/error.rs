use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    #[error(transparent)]
    Core(#[from] kgclin::Error),
}

impl CliError {
    /// 1 usage, 2 data or format, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::MissingPath(_) => 2,
            CliError::Core(kgclin::Error::Internal(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}
