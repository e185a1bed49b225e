use thiserror::Error;

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("model references missing tensor {0:?}")]
    MissingTensor(String),

    #[error("tensor {tensor}: {source}")]
    TensorRange {
        tensor: String,
        #[source]
        source: privnet_core::Error,
    },

    #[error("layer {index} ({layer}): {source}")]
    SecureLayer {
        index: usize,
        layer: String,
        #[source]
        source: privnet_core::Error,
    },

    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("training configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] privnet_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
