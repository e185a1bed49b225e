use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} out of fixed-point range (|x| must be < 2^{bound_bits})")]
    EncodeOverflow { value: f64, bound_bits: u32 },

    #[error("invalid fixed-point codec: {0}")]
    InvalidCodec(String),

    #[error("malformed shares: {0}")]
    MalformedShares(String),

    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },

    #[error("invalid sharing parameters: {0}")]
    InvalidParams(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("protocol misuse: {0}")]
    ProtocolMisuse(String),

    #[error("session desynchronized: {0}")]
    Desync(String),

    #[error("session aborted by peer: {0}")]
    Aborted(String),

    #[error("channel to {peer} closed")]
    ChannelClosed { peer: &'static str },

    #[error("unsupported adversary setting: {0}")]
    UnsupportedAdversary(String),

    #[error("wire format error: {0}")]
    Wire(String),

    #[error("authentication failure on channel")]
    Authentication,

    #[error("share vault: {0}")]
    Vault(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
