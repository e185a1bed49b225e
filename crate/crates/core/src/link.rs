//! Point-to-point frame transports.
//!
//! [`MemoryLink`] connects parties running as threads of one process;
//! [`StreamLink`] runs over TCP. [`SealedLink`] wraps either with
//! ChaCha20-Poly1305 under a pre-shared key, giving the authenticated
//! private channels the protocols assume.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::wire::{Frame, SessionId};

pub trait Link: Send {
    fn send(&mut self, frame: Frame) -> Result<()>;
    fn recv(&mut self) -> Result<Frame>;
}

impl<L: Link + ?Sized> Link for Box<L> {
    fn send(&mut self, frame: Frame) -> Result<()> {
        (**self).send(frame)
    }
    fn recv(&mut self) -> Result<Frame> {
        (**self).recv()
    }
}

/// Receives a copy of every frame a party accepts, after decryption.
pub type TranscriptSink = Arc<Mutex<dyn Write + Send>>;

pub fn record(sink: &Option<TranscriptSink>, frame: &Frame) {
    if let Some(sink) = sink {
        if let Ok(mut w) = sink.lock() {
            let _ = w.write_all(&frame.encode());
        }
    }
}

pub struct MemoryLink {
    tx: Sender<Frame>,
    rx: Receiver<Frame>,
    timeout: Option<Duration>,
}

impl MemoryLink {
    pub fn pair() -> (MemoryLink, MemoryLink) {
        let (tx_a, rx_b) = mpsc::channel();
        let (tx_b, rx_a) = mpsc::channel();
        (MemoryLink { tx: tx_a, rx: rx_a, timeout: None }, MemoryLink { tx: tx_b, rx: rx_b, timeout: None })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }
}

impl Link for MemoryLink {
    fn send(&mut self, frame: Frame) -> Result<()> {
        self.tx.send(frame).map_err(|_| Error::ChannelClosed { peer: "memory peer" })
    }

    fn recv(&mut self) -> Result<Frame> {
        match self.timeout {
            None => self.rx.recv().map_err(|_| Error::ChannelClosed { peer: "memory peer" }),
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => Error::Io(io::Error::new(io::ErrorKind::TimedOut, "recv timed out")),
                RecvTimeoutError::Disconnected => Error::ChannelClosed { peer: "memory peer" },
            }),
        }
    }
}

/// TCP transport. Writes go through a background thread so both ends of a
/// simultaneous exchange can send large payloads before either reads.
pub struct StreamLink {
    reader: BufReader<TcpStream>,
    stream: TcpStream,
    tx: Option<Sender<Vec<u8>>>,
    writer: Option<JoinHandle<()>>,
}

impl StreamLink {
    pub fn new(stream: TcpStream, timeout: Option<Duration>) -> Result<Self> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        stream.set_write_timeout(timeout)?;
        let write_half = stream.try_clone()?;
        let (tx, rx) = mpsc::channel::<Vec<u8>>();
        let writer = std::thread::spawn(move || {
            let mut w = BufWriter::new(write_half);
            for bytes in rx {
                if w.write_all(&bytes).and_then(|_| w.flush()).is_err() {
                    break;
                }
            }
        });
        Ok(Self { reader: BufReader::new(stream.try_clone()?), stream, tx: Some(tx), writer: Some(writer) })
    }

    pub fn peer_addr(&self) -> Option<std::net::SocketAddr> {
        self.stream.peer_addr().ok()
    }

    /// Flushes pending writes and closes the write half.
    pub fn finish(&mut self) {
        self.tx.take();
        if let Some(h) = self.writer.take() {
            let _ = h.join();
        }
        let _ = self.stream.shutdown(Shutdown::Write);
    }
}

impl Link for StreamLink {
    fn send(&mut self, frame: Frame) -> Result<()> {
        let tx = self.tx.as_ref().ok_or(Error::ChannelClosed { peer: "tcp peer" })?;
        tx.send(frame.encode()).map_err(|_| Error::ChannelClosed { peer: "tcp peer" })
    }

    fn recv(&mut self) -> Result<Frame> {
        Frame::read_from(&mut self.reader).map_err(|e| match e {
            Error::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => Error::ChannelClosed { peer: "tcp peer" },
            other => other,
        })
    }
}

impl Drop for StreamLink {
    fn drop(&mut self) {
        self.finish();
    }
}

/// Derives a per-session channel key from a pre-shared base key.
pub fn derive_key(base: &[u8; 32], label: &str, session: SessionId) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(base);
    h.update(session.0);
    h.finalize().into()
}

/// Payload encryption for one channel direction pair.
#[derive(Clone)]
pub struct ChannelCipher {
    aead: ChaCha20Poly1305,
    send_dir: u8,
    recv_dir: u8,
}

impl ChannelCipher {
    /// `send_dir` and `recv_dir` must differ so the two directions never
    /// share a nonce under the same key.
    pub fn new(key: &[u8; 32], send_dir: u8, recv_dir: u8) -> Self {
        assert_ne!(send_dir, recv_dir);
        Self { aead: ChaCha20Poly1305::new(Key::from_slice(key)), send_dir, recv_dir }
    }

    fn nonce(dir: u8, seq: u64) -> [u8; 12] {
        let mut n = [0u8; 12];
        n[0] = dir;
        n[4..].copy_from_slice(&seq.to_be_bytes());
        n
    }

    pub fn seal(&self, mut frame: Frame) -> Result<Frame> {
        let ad = frame.associated_data();
        let nonce = Self::nonce(self.send_dir, frame.seq);
        frame.payload = self
            .aead
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: &frame.payload, aad: &ad })
            .map_err(|_| Error::Authentication)?;
        Ok(frame)
    }

    pub fn open(&self, mut frame: Frame) -> Result<Frame> {
        let ad = frame.associated_data();
        let nonce = Self::nonce(self.recv_dir, frame.seq);
        frame.payload = self
            .aead
            .decrypt(Nonce::from_slice(&nonce), Payload { msg: &frame.payload, aad: &ad })
            .map_err(|_| Error::Authentication)?;
        Ok(frame)
    }
}

pub const TAG_LEN: usize = 16;

pub struct SealedLink<L> {
    inner: L,
    cipher: ChannelCipher,
}

impl<L: Link> SealedLink<L> {
    pub fn new(inner: L, cipher: ChannelCipher) -> Self {
        Self { inner, cipher }
    }

    pub fn into_inner(self) -> L {
        self.inner
    }
}

impl<L: Link> Link for SealedLink<L> {
    fn send(&mut self, frame: Frame) -> Result<()> {
        let sealed = self.cipher.seal(frame)?;
        self.inner.send(sealed)
    }

    fn recv(&mut self) -> Result<Frame> {
        let frame = self.inner.recv()?;
        // ABORT frames may come from a peer that never finished the handshake
        if frame.msg_type == crate::wire::MsgType::Abort {
            if let Ok(f) = self.cipher.open(frame.clone()) {
                return Ok(f);
            }
            return Ok(frame);
        }
        self.cipher.open(frame)
    }
}
