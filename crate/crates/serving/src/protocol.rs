//! Serving messages on top of the engine's frame format.
//!
//! Client to queue, all frames carrying the request id as session:
//!
//! ```text
//! PREDICT_SUBMIT  [u32 LE input length][model id, utf-8]
//! SHARE_PAYLOAD   seq = target party (0 or 1), payload sealed for that party
//! SHARE_PAYLOAD   the other party
//! ```
//!
//! Queue to client: two RESULT_SHARE frames (seq = source party, sealed by
//! that party for the client) followed by STATUS, or a single non-OK STATUS.
//!
//! Every connection to a party server opens with HELLO `[role][from]`,
//! where role 0 is the queue and role 1 a peer party.

use std::fmt;
use std::io;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use privnet_core::link::{derive_key, ChannelCipher};
use privnet_core::{Frame, MsgType, SessionId};

use crate::error::{Result, ServingError};

pub const ROLE_QUEUE: u8 = 0;
pub const ROLE_PEER: u8 = 1;

/// Key label for the client's end-to-end channel with a computing party.
pub const CLIENT_LABEL: &str = "client-share";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StatusCode {
    Ok = 0,
    Busy = 1,
    BadRequest = 2,
    Duplicate = 3,
    ServiceUnavailable = 4,
    Timeout = 5,
}

impl StatusCode {
    pub fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => StatusCode::Ok,
            1 => StatusCode::Busy,
            2 => StatusCode::BadRequest,
            3 => StatusCode::Duplicate,
            4 => StatusCode::ServiceUnavailable,
            5 => StatusCode::Timeout,
            other => return Err(ServingError::Protocol(format!("unknown status code {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            StatusCode::Ok => "OK",
            StatusCode::Busy => "BUSY",
            StatusCode::BadRequest => "BAD_REQUEST",
            StatusCode::Duplicate => "DUPLICATE",
            StatusCode::ServiceUnavailable => "SERVICE_UNAVAILABLE",
            StatusCode::Timeout => "TIMEOUT",
        }
    }
}

impl fmt::Display for StatusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn status_frame(session: SessionId, code: StatusCode, message: &str) -> Frame {
    let mut payload = vec![code as u8];
    payload.extend_from_slice(message.as_bytes());
    Frame::new(MsgType::Status, session, 0, payload)
}

pub fn parse_status(frame: &Frame) -> Result<(StatusCode, String)> {
    if frame.msg_type != MsgType::Status || frame.payload.is_empty() {
        return Err(ServingError::Protocol(format!("expected STATUS, got {:?}", frame.msg_type)));
    }
    let code = StatusCode::from_u8(frame.payload[0])?;
    Ok((code, String::from_utf8_lossy(&frame.payload[1..]).into_owned()))
}

/// Turns a non-OK status frame into the matching error.
pub fn expect_ok(frame: &Frame) -> Result<()> {
    match parse_status(frame)? {
        (StatusCode::Ok, _) => Ok(()),
        (code, message) => Err(ServingError::Status { code, message }),
    }
}

pub fn hello_frame(session: SessionId, role: u8, from: u8) -> Frame {
    Frame::new(MsgType::Hello, session, 0, vec![role, from])
}

pub fn parse_hello(frame: &Frame) -> Result<(u8, u8)> {
    match (frame.msg_type, frame.payload.as_slice()) {
        (MsgType::Hello, &[role, from]) if role <= ROLE_PEER && from <= 2 => Ok((role, from)),
        (MsgType::Hello, _) => Err(ServingError::Protocol("malformed HELLO".into())),
        (other, _) => Err(ServingError::Protocol(format!("expected HELLO, got {other:?}"))),
    }
}

pub fn submit_payload(input_len: usize, model: &str) -> Vec<u8> {
    let mut p = (input_len as u32).to_le_bytes().to_vec();
    p.extend_from_slice(model.as_bytes());
    p
}

pub fn parse_submit(frame: &Frame) -> Result<(usize, String)> {
    if frame.msg_type != MsgType::PredictSubmit || frame.payload.len() < 4 {
        return Err(ServingError::Protocol(format!("expected PREDICT_SUBMIT, got {:?}", frame.msg_type)));
    }
    let n = u32::from_le_bytes(frame.payload[..4].try_into().unwrap()) as usize;
    let model = String::from_utf8(frame.payload[4..].to_vec())
        .map_err(|_| ServingError::Protocol("model id is not utf-8".into()))?;
    Ok((n, model))
}

/// Cipher the client uses towards `party`; the party uses [`party_cipher`].
pub fn client_cipher(party_key: &[u8; 32], session: SessionId) -> ChannelCipher {
    ChannelCipher::new(&derive_key(party_key, CLIENT_LABEL, session), 0, 1)
}

pub fn party_cipher(party_key: &[u8; 32], session: SessionId) -> ChannelCipher {
    ChannelCipher::new(&derive_key(party_key, CLIENT_LABEL, session), 1, 0)
}

/// Key label for the channel between two parties.
pub fn mesh_label(a: u8, b: u8) -> String {
    format!("mesh-{}{}", a.min(b), a.max(b))
}

pub fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

/// Reads one frame straight off the socket, without buffering, so the
/// stream can be handed to another reader afterwards.
pub fn read_frame(stream: &mut TcpStream) -> Result<Frame> {
    Frame::read_from(stream).map_err(|e| match e {
        privnet_core::Error::Io(io) if is_timeout(&io) => ServingError::Timeout("waiting for a frame".into()),
        privnet_core::Error::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => {
            ServingError::Unavailable("connection closed by remote".into())
        }
        other => other.into(),
    })
}

pub fn write_frame(stream: &mut TcpStream, frame: &Frame) -> Result<()> {
    frame.write_to(stream).map_err(|e| match e {
        privnet_core::Error::Io(io) => ServingError::Unavailable(format!("write failed: {io}")),
        other => other.into(),
    })
}

pub fn resolve(endpoint: &str) -> Result<SocketAddr> {
    endpoint
        .to_socket_addrs()
        .map_err(|e| ServingError::Invalid(format!("endpoint {endpoint}: {e}")))?
        .next()
        .ok_or_else(|| ServingError::Invalid(format!("endpoint {endpoint} resolves to nothing")))
}

/// Connects with a bounded wait and sets read and write timeouts.
pub fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream> {
    let addr = resolve(endpoint)?;
    let stream = TcpStream::connect_timeout(&addr, timeout.min(Duration::from_secs(10)))
        .map_err(|e| ServingError::Unavailable(format!("{endpoint}: {e}")))?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_roundtrip() {
        for code in 0..6u8 {
            let c = StatusCode::from_u8(code).unwrap();
            let f = status_frame(SessionId([2; 16]), c, "why");
            assert_eq!(parse_status(&f).unwrap(), (c, "why".to_string()));
        }
        assert!(StatusCode::from_u8(6).is_err());
        assert!(expect_ok(&status_frame(SessionId::default(), StatusCode::Busy, "")).is_err());
    }

    #[test]
    fn hello_and_submit() {
        let s = SessionId([9; 16]);
        assert_eq!(parse_hello(&hello_frame(s, ROLE_PEER, 2)).unwrap(), (1, 2));
        assert!(parse_hello(&Frame::new(MsgType::Hello, s, 0, vec![3, 0])).is_err());
        let f = Frame::new(MsgType::PredictSubmit, s, 0, submit_payload(18750, "abc"));
        assert_eq!(parse_submit(&f).unwrap(), (18750, "abc".into()));
        assert_eq!(mesh_label(2, 0), "mesh-02");
    }

    #[test]
    fn client_and_party_ciphers_pair_up() {
        let s = SessionId([4; 16]);
        let key = [5u8; 32];
        let f = Frame::new(MsgType::SharePayload, s, 1, vec![1, 2, 3, 4]);
        let sealed = client_cipher(&key, s).seal(f.clone()).unwrap();
        assert_eq!(party_cipher(&key, s).open(sealed.clone()).unwrap(), f);
        assert!(party_cipher(&[6u8; 32], s).open(sealed).is_err());
    }
}
