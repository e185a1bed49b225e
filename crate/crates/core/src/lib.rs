//! Exact ring arithmetic, secret sharing and the semi-honest three-party
//! protocol engine used for private inference.
//!
//! Parties `P0` and `P1` hold additive shares over `Z_{2^64}`; `P2` is a
//! helper that deals correlated randomness (Beaver triples) and never holds
//! inputs or outputs. Every protocol function is executed by all three
//! parties in lockstep, with the helper's own "share" of every value fixed
//! at zero.

pub mod error;
pub mod link;
pub mod mpc;
pub mod ring;
pub mod sharing;
pub mod wire;

pub use error::{Error, Result};
pub use mpc::{AdversaryConfig, Party, PartyContext};
pub use ring::{FixedPointCodec, Ring, RingElement, Word};
pub use wire::{Frame, MsgType, SessionId};
