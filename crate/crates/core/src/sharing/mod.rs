//! Additive 2-out-of-2 sharing over `Z_{2^w}` and Shamir `(t, n)` sharing
//! over a prime field, plus the on-disk share vault.

pub mod additive;
pub mod shamir;
pub mod vault;

pub use additive::{additive_reconstruct, additive_share, AdditiveShare};
pub use shamir::{shamir_reconstruct, shamir_share, ShamirParams, ShamirShare};
pub use vault::{ShareVault, VaultTensor};
