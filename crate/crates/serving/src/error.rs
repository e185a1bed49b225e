use thiserror::Error;

use crate::protocol::StatusCode;

pub type Result<T, E = ServingError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServingError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid config: {0}")]
    Invalid(String),

    #[error("share bundle {path}: {message}")]
    Bundle { path: std::path::PathBuf, message: String },

    /// The remote side answered with a non-OK status.
    #[error("{code}: {message}")]
    Status { code: StatusCode, message: String },

    #[error("service unavailable: {0}")]
    Unavailable(String),

    #[error("timed out: {0}")]
    Timeout(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error(transparent)]
    Core(#[from] privnet_core::Error),

    #[error(transparent)]
    Nn(#[from] privnet_nn::NnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServingError {
    /// True for failures caused by the network or a remote service rather
    /// than by the caller's input or configuration.
    pub fn is_service_failure(&self) -> bool {
        match self {
            ServingError::Unavailable(_) | ServingError::Timeout(_) | ServingError::Io(_) => true,
            ServingError::Status { code, .. } => !matches!(code, StatusCode::BadRequest | StatusCode::Duplicate),
            ServingError::Core(e) => matches!(
                e,
                privnet_core::Error::Io(_)
                    | privnet_core::Error::ChannelClosed { .. }
                    | privnet_core::Error::Aborted(_)
            ),
            _ => false,
        }
    }
}
