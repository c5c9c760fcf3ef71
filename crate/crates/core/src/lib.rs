//! Hybrid clinical text classification: trigger-phrase rules label the rare
//! classes, and a dual-channel convolutional network over trigger-word and
//! concept embeddings labels the rest.

pub mod baselines;
pub mod cascade;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod exec;
pub mod kgcnn;
pub mod linker;
pub mod modelfile;
pub mod pipeline;
pub mod preprocess;
pub mod synthgen;
pub mod trigger;

pub use error::{Error, Result};
