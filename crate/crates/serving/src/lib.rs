//! Private prediction serving: three party servers holding a shared model,
//! a queue server that brokers requests, and a client that shares inputs
//! and reconstructs results. Input shares are sealed end to end between the
//! client and each party, so the queue only relays ciphertext.

pub mod bundle;
pub mod client;
pub mod config;
pub mod error;
pub mod party;
pub mod protocol;
pub mod queue;
mod server;

pub use bundle::{load_party_model, verify_bundle, write_bundle, ShareReceipt};
pub use client::{Client, Prediction};
pub use config::QueueConfig;
pub use error::{Result, ServingError};
pub use party::{serve_party, start_party, Capture};
pub use protocol::StatusCode;
pub use queue::{serve_queue, start_queue, start_queue_with};
pub use server::ServerHandle;
