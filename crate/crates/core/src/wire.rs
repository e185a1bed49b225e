//! Length-prefixed frames shared by the party protocol and the serving
//! layer.
//!
//! ```text
//! [u32 BE payload length][u8 type][16-byte session id][u64 BE sequence][payload]
//! ```
//!
//! Numeric payloads are little-endian `u64` words, row-major for tensors.

use std::fmt;
use std::io::{Read, Write};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ring::{Ring, Word};

pub const HEADER_LEN: usize = 4 + 1 + 16 + 8;

/// Frames above this size are rejected before allocation.
pub const MAX_PAYLOAD: usize = 256 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    TripleDelivery = 1,
    BeaverOpen = 2,
    BitOpen = 3,
    ShareDelivery = 4,
    OutputShare = 5,
    Abort = 6,
    PredictSubmit = 7,
    SharePayload = 8,
    ResultShare = 9,
    Status = 10,
    /// Connection preamble: identifies the sender's role and session.
    Hello = 11,
}

impl MsgType {
    pub fn from_u8(b: u8) -> Result<Self> {
        use MsgType::*;
        Ok(match b {
            1 => TripleDelivery,
            2 => BeaverOpen,
            3 => BitOpen,
            4 => ShareDelivery,
            5 => OutputShare,
            6 => Abort,
            7 => PredictSubmit,
            8 => SharePayload,
            9 => ResultShare,
            10 => Status,
            11 => Hello,
            other => return Err(Error::Wire(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SessionId(pub [u8; 16]);

impl SessionId {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut id = [0u8; 16];
        rng.fill_bytes(&mut id);
        SessionId(id)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionId({})", self.to_hex())
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub session: SessionId,
    pub seq: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, session: SessionId, seq: u64, payload: Vec<u8>) -> Self {
        Self { msg_type, session, seq, payload }
    }

    /// Header fields other than the length; authenticated as associated data
    /// when a channel is sealed.
    pub fn associated_data(&self) -> [u8; 25] {
        let mut ad = [0u8; 25];
        ad[0] = self.msg_type as u8;
        ad[1..17].copy_from_slice(&self.session.0);
        ad[17..25].copy_from_slice(&self.seq.to_be_bytes());
        ad
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.associated_data());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(Error::Wire(format!("payload of {} bytes exceeds limit", self.payload.len())));
        }
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let len = u32::from_be_bytes(header[0..4].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Wire(format!("announced payload of {len} bytes")));
        }
        let msg_type = MsgType::from_u8(header[4])?;
        let mut session = [0u8; 16];
        session.copy_from_slice(&header[5..21]);
        let seq = u64::from_be_bytes(header[21..29].try_into().unwrap());
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Self { msg_type, session: SessionId(session), seq, payload })
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let frame = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Wire("trailing bytes after frame".into()));
        }
        Ok(frame)
    }
}

pub fn words_to_bytes(words: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Wire(format!("payload of {} bytes is not a whole number of words", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn ring_to_bytes<W: Word>(values: &[Ring<W>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_u64().to_le_bytes());
    }
    out
}

pub fn bytes_to_ring<W: Word>(bytes: &[u8]) -> Result<Vec<Ring<W>>> {
    Ok(bytes_to_words(bytes)?.into_iter().map(Ring::from_u64).collect())
}
