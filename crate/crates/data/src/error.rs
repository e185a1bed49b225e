use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DataError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot label {0:?}: no NORMAL, virus or bacteria keyword")]
    Unlabelable(String),

    #[error("cannot ingest {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("{path} line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
