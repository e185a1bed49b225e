//! Party server. Each request arrives from the queue on its own connection;
//! the three parties then open a fresh sealed mesh for that session and run
//! the secure forward pass. Party 0 dials parties 1 and 2, party 1 dials
//! party 2, and inbound peer connections wait in a rendezvous table until
//! the matching request shows up.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use privnet_core::link::{derive_key, record, ChannelCipher, SealedLink, StreamLink, TranscriptSink};
use privnet_core::mpc::local::session_dealer_seed;
use privnet_core::wire::{bytes_to_ring, ring_to_bytes};
use privnet_core::{Frame, MsgType, Party, PartyContext, RingElement, SessionId};
use privnet_nn::{forward_secure, NnError, SharedModel};

use crate::config::QueueConfig;
use crate::error::{Result, ServingError};
use crate::protocol::{
    connect, hello_frame, mesh_label, parse_hello, parse_submit, party_cipher, read_frame, status_frame, write_frame,
    StatusCode, ROLE_PEER, ROLE_QUEUE,
};
use crate::server::{spawn_accept_loop, ServerHandle};

#[derive(Default)]
struct Rendezvous {
    slots: Mutex<HashMap<(SessionId, u8), (TcpStream, Instant)>>,
    ready: Condvar,
}

impl Rendezvous {
    fn offer(&self, session: SessionId, from: u8, stream: TcpStream, ttl: Duration) {
        let mut slots = self.slots.lock().unwrap();
        slots.retain(|_, (_, at)| at.elapsed() < ttl);
        slots.insert((session, from), (stream, Instant::now()));
        self.ready.notify_all();
    }

    fn take(&self, session: SessionId, from: u8, timeout: Duration) -> Result<TcpStream> {
        let deadline = Instant::now() + timeout;
        let mut slots = self.slots.lock().unwrap();
        loop {
            if let Some((s, _)) = slots.remove(&(session, from)) {
                return Ok(s);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(ServingError::Timeout(format!("waiting for P{from} on session {session}")));
            }
            slots = self.ready.wait_timeout(slots, deadline - now).unwrap().0;
        }
    }
}

/// Where a party records the frames it receives, after decryption.
#[derive(Clone)]
pub enum Capture {
    /// Every session into one sink.
    Sink(TranscriptSink),
    /// One `<session hex>.p<party>.transcript` file per session in this
    /// directory, so parties can share it.
    Directory(PathBuf),
}

impl Capture {
    fn open(&self, party: Party, session: SessionId) -> Result<TranscriptSink> {
        Ok(match self {
            Capture::Sink(s) => s.clone(),
            Capture::Directory(dir) => {
                let f = File::create(dir.join(format!("{session}.p{}.transcript", party.index())))?;
                Arc::new(Mutex::new(BufWriter::new(f)))
            }
        })
    }
}

struct PartyState {
    party: Party,
    config: QueueConfig,
    model: SharedModel,
    capture: Option<Capture>,
    rendezvous: Rendezvous,
}

/// Starts party `party` on an already bound listener. `model_id` must match
/// the config's model identifier.
pub fn start_party(
    listener: TcpListener,
    party: Party,
    config: QueueConfig,
    model: SharedModel,
    model_id: &str,
    capture: Option<Capture>,
) -> Result<ServerHandle> {
    config.validate()?;
    if model_id != config.model {
        return Err(ServingError::Invalid(format!("loaded model {model_id} but the config serves {}", config.model)));
    }
    if model.party != party {
        return Err(ServingError::Invalid(format!("model shares belong to {}, not {party}", model.party)));
    }
    if model.arch.codec != config.codec || model.arch.input != config.input_shape {
        return Err(ServingError::Invalid(format!(
            "model takes {} inputs under codec {:?}; config says {} under {:?}",
            model.arch.input, model.arch.codec, config.input_shape, config.codec
        )));
    }
    let state = Arc::new(PartyState { party, config, model, capture, rendezvous: Rendezvous::default() });
    spawn_accept_loop(listener, move |stream| state.handle(stream))
}

/// Binds the party's configured endpoint and starts serving.
pub fn serve_party(
    party: Party,
    config: QueueConfig,
    model: SharedModel,
    model_id: &str,
    capture: Option<Capture>,
) -> Result<ServerHandle> {
    let listener = TcpListener::bind(&config.parties[party.index()])?;
    start_party(listener, party, config, model, model_id, capture)
}

impl PartyState {
    fn handle(&self, mut stream: TcpStream) {
        let timeout = self.config.timeout();
        if stream.set_read_timeout(Some(timeout)).is_err() || stream.set_write_timeout(Some(timeout)).is_err() {
            return;
        }
        let Ok(hello) = read_frame(&mut stream) else { return };
        match parse_hello(&hello) {
            Ok((ROLE_PEER, from)) if from as usize != self.party.index() => {
                self.rendezvous.offer(hello.session, from, stream, timeout)
            }
            Ok((ROLE_QUEUE, _)) => {
                let session = hello.session;
                let reply = match self.serve_request(&mut stream, session) {
                    Ok(frame) => frame,
                    Err(e) => {
                        let code = match e {
                            ServingError::Protocol(_) | ServingError::Nn(NnError::Shape(_)) => StatusCode::BadRequest,
                            ServingError::Timeout(_) => StatusCode::Timeout,
                            _ => StatusCode::ServiceUnavailable,
                        };
                        status_frame(session, code, &format!("{}: {e}", self.party))
                    }
                };
                let _ = write_frame(&mut stream, &reply);
            }
            _ => {}
        }
    }

    fn serve_request(&self, stream: &mut TcpStream, session: SessionId) -> Result<Frame> {
        let submit = read_frame(stream)?;
        let transcript = self.capture.as_ref().map(|c| c.open(self.party, session)).transpose()?;
        record(&transcript, &submit);
        if submit.session != session {
            return Err(ServingError::Protocol("request frames carry different sessions".into()));
        }
        let (n, model) = parse_submit(&submit)?;
        if model != self.config.model {
            return Err(ServingError::Protocol(format!("request for model {model}")));
        }
        if n != self.model.arch.input.len() {
            return Err(ServingError::Protocol(format!("input of {n} values, model takes {}", self.model.arch.input)));
        }
        let me = self.party.index();
        let input = if self.party.is_dealer() {
            vec![RingElement::zero(); n]
        } else {
            let sealed = read_frame(stream)?;
            if sealed.msg_type != MsgType::SharePayload || sealed.session != session || sealed.seq != me as u64 {
                return Err(ServingError::Protocol("expected this party's SHARE_PAYLOAD".into()));
            }
            let frame = party_cipher(&self.config.party_keys[me], session)
                .open(sealed)
                .map_err(|_| ServingError::Protocol("input share failed authentication".into()))?;
            record(&transcript, &frame);
            let input = bytes_to_ring(&frame.payload)?;
            if input.len() != n {
                return Err(ServingError::Protocol(format!("share has {} values, announced {n}", input.len())));
            }
            input
        };
        let out = self.compute(session, &input, transcript)?;
        if self.party.is_dealer() {
            return Ok(status_frame(session, StatusCode::Ok, ""));
        }
        let frame = Frame::new(MsgType::ResultShare, session, me as u64, ring_to_bytes(&out));
        Ok(party_cipher(&self.config.party_keys[me], session).seal(frame)?)
    }

    fn mesh_stream(&self, peer: Party, session: SessionId) -> Result<TcpStream> {
        let me = self.party.index() as u8;
        let timeout = self.config.timeout();
        if (me as usize) < peer.index() {
            let mut s = connect(&self.config.parties[peer.index()], timeout)?;
            write_frame(&mut s, &hello_frame(session, ROLE_PEER, me))?;
            Ok(s)
        } else {
            self.rendezvous.take(session, peer.index() as u8, timeout)
        }
    }

    fn compute(
        &self,
        session: SessionId,
        input: &[RingElement],
        transcript: Option<TranscriptSink>,
    ) -> Result<Vec<RingElement>> {
        let me = self.party.index() as u8;
        let timeout = self.config.timeout();
        let mut ctx = PartyContext::<u64>::new(self.party, session, self.config.codec);
        for peer in Party::ALL.into_iter().filter(|&p| p != self.party) {
            let stream = self.mesh_stream(peer, session)?;
            let p = peer.index() as u8;
            let key = derive_key(&self.config.mesh_key, &mesh_label(me, p), session);
            let link = SealedLink::new(StreamLink::new(stream, Some(timeout))?, ChannelCipher::new(&key, me, p));
            ctx = ctx.with_link(peer, Box::new(link));
        }
        if self.party.is_dealer() {
            ctx = ctx.with_dealer_seed(session_dealer_seed(&self.config.dealer_seed, session));
        }
        if let Some(t) = transcript {
            ctx = ctx.with_transcript(t);
        }
        forward_secure(&mut ctx, &self.model, input).map_err(|e| {
            ctx.abort(&e.to_string());
            e.into()
        })
    }
}
