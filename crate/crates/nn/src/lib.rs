//! Model representation, forward passes (plaintext and over shares) and
//! plaintext training with optional differentially-private SGD.

pub mod accountant;
pub mod backward;
pub mod dp;
pub mod error;
pub mod forward;
pub mod graph;
pub mod model_file;
pub mod ops;
pub mod secure;
pub mod train;

pub use accountant::{account_epsilon, PrivacySpend};
pub use backward::{backward, Gradients, Sample};
pub use dp::{clip_gradient, dp_sgd_step, sgd_step, DpSgdConfig};
pub use error::{NnError, Result};
pub use forward::{argmax_class, forward_plain};
pub use graph::{Architecture, Layer, ModelGraph, PoolKind, Shape, Tensor};
pub use secure::{forward_secure, share_model, SharedModel};
pub use train::{evaluate, train, EpochMetrics, PrivacyConfig, TrainConfig, TrainOutcome};
