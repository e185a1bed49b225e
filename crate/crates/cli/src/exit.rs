//! Exit-code contract: 0 success, 2 user or configuration error, 3 service
//! or network error.

use std::fmt::Display;

use privnet_serving::ServingError;

pub const USER: u8 = 2;
pub const SERVICE: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn user(msg: impl Display) -> Failure {
    Failure { code: USER, error: anyhow::anyhow!("{msg}") }
}

pub trait Classify<T> {
    fn user(self) -> CmdResult<T>;
    fn service(self) -> CmdResult<T>;
    fn user_ctx(self, ctx: impl Display) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn user(self) -> CmdResult<T> {
        self.map_err(|e| Failure { code: USER, error: e.into() })
    }

    fn service(self) -> CmdResult<T> {
        self.map_err(|e| Failure { code: SERVICE, error: e.into() })
    }

    fn user_ctx(self, ctx: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure { code: USER, error: e.into().context(ctx.to_string()) })
    }
}

/// Serving errors split by cause: the remote side failing is a service
/// error, anything about the request itself is the user's.
pub fn serving<T>(r: Result<T, ServingError>) -> CmdResult<T> {
    r.map_err(|e| Failure { code: if e.is_service_failure() { SERVICE } else { USER }, error: e.into() })
}
