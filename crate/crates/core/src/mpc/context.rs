use std::collections::HashSet;
use std::marker::PhantomData;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::link::{record, Link, TranscriptSink};
use crate::mpc::Party;
use crate::ring::{FixedPointCodec, Ring, Word};
use crate::wire::{bytes_to_ring, ring_to_bytes, Frame, MsgType, SessionId};

/// One party's state for one protocol session.
///
/// Sequence numbers are tracked per channel and direction; any frame that
/// arrives out of order, for another session, or of an unexpected type
/// desynchronizes the session.
pub struct PartyContext<W: Word> {
    party: Party,
    session: SessionId,
    codec: FixedPointCodec,
    links: [Option<Box<dyn Link>>; 3],
    send_seq: [u64; 3],
    recv_seq: [u64; 3],
    dealer_rng: Option<ChaCha20Rng>,
    next_triple: u64,
    consumed: HashSet<u64>,
    transcript: Option<TranscriptSink>,
    _word: PhantomData<W>,
}

impl<W: Word> PartyContext<W> {
    pub fn new(party: Party, session: SessionId, codec: FixedPointCodec) -> Self {
        Self {
            party,
            session,
            codec,
            links: [None, None, None],
            send_seq: [0; 3],
            recv_seq: [0; 3],
            dealer_rng: None,
            next_triple: 0,
            consumed: HashSet::new(),
            transcript: None,
            _word: PhantomData,
        }
    }

    pub fn with_link(mut self, peer: Party, link: Box<dyn Link>) -> Self {
        assert_ne!(peer, self.party, "a party has no link to itself");
        self.links[peer.index()] = Some(link);
        self
    }

    /// Seeds the helper's correlated-randomness generator. Only meaningful
    /// for `P2`.
    pub fn with_dealer_seed(mut self, seed: [u8; 32]) -> Self {
        self.dealer_rng = Some(ChaCha20Rng::from_seed(seed));
        self
    }

    pub fn with_transcript(mut self, sink: TranscriptSink) -> Self {
        self.transcript = Some(sink);
        self
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    pub fn codec(&self) -> FixedPointCodec {
        self.codec
    }

    pub fn is_dealer(&self) -> bool {
        self.party.is_dealer()
    }

    pub(crate) fn dealer_rng(&mut self) -> Result<&mut ChaCha20Rng> {
        if !self.is_dealer() {
            return Err(Error::ProtocolMisuse(format!("{} asked to deal correlated randomness", self.party)));
        }
        self.dealer_rng.as_mut().ok_or_else(|| Error::ProtocolMisuse("dealer has no randomness seed".into()))
    }

    pub(crate) fn issue_triple_id(&mut self) -> u64 {
        let id = self.next_triple;
        self.next_triple += 1;
        id
    }

    /// Marks a triple as used; a second use is rejected.
    pub fn consume_triple(&mut self, id: u64) -> Result<()> {
        if !self.consumed.insert(id) {
            return Err(Error::ProtocolMisuse(format!("triple {id} consumed twice")));
        }
        Ok(())
    }

    fn link(&mut self, peer: Party) -> Result<&mut Box<dyn Link>> {
        let me = self.party;
        self.links[peer.index()].as_mut().ok_or_else(|| Error::ProtocolMisuse(format!("{me} has no channel to {peer}")))
    }

    pub fn send(&mut self, to: Party, kind: MsgType, payload: Vec<u8>) -> Result<()> {
        let seq = self.send_seq[to.index()];
        let frame = Frame::new(kind, self.session, seq, payload);
        self.link(to)?.send(frame)?;
        self.send_seq[to.index()] += 1;
        Ok(())
    }

    pub fn recv(&mut self, from: Party, kind: MsgType) -> Result<Vec<u8>> {
        let frame = self.link(from)?.recv()?;
        record(&self.transcript, &frame);
        if frame.msg_type == MsgType::Abort {
            return Err(Error::Aborted(format!("{from}: {}", String::from_utf8_lossy(&frame.payload))));
        }
        if frame.session != self.session {
            return Err(Error::Desync(format!("frame for session {} on session {}", frame.session, self.session)));
        }
        let expected = self.recv_seq[from.index()];
        if frame.seq != expected {
            return Err(Error::Desync(format!("expected sequence {expected} from {from}, got {}", frame.seq)));
        }
        if frame.msg_type != kind {
            return Err(Error::Desync(format!("expected {kind:?} from {from}, got {:?}", frame.msg_type)));
        }
        self.recv_seq[from.index()] += 1;
        Ok(frame.payload)
    }

    pub fn send_ring(&mut self, to: Party, kind: MsgType, values: &[Ring<W>]) -> Result<()> {
        self.send(to, kind, ring_to_bytes(values))
    }

    pub fn recv_ring(&mut self, from: Party, kind: MsgType, len: usize) -> Result<Vec<Ring<W>>> {
        let v = bytes_to_ring(&self.recv(from, kind)?)?;
        if v.len() != len {
            return Err(Error::Desync(format!("expected {len} ring elements from {from}, got {}", v.len())));
        }
        Ok(v)
    }

    /// Sends `payload` to the other computing party, then receives theirs.
    /// Both parties send first, so an exchange costs one round.
    pub fn exchange(&mut self, kind: MsgType, payload: Vec<u8>) -> Result<Vec<u8>> {
        let peer = self
            .party
            .peer()
            .ok_or_else(|| Error::ProtocolMisuse("the dealer does not take part in openings".into()))?;
        self.send(peer, kind, payload)?;
        self.recv(peer, kind)
    }

    /// Best-effort notification of every connected peer.
    pub fn abort(&mut self, reason: &str) {
        for p in Party::ALL {
            if p != self.party && self.links[p.index()].is_some() {
                let _ = self.send(p, MsgType::Abort, reason.as_bytes().to_vec());
            }
        }
    }

    pub fn frames_sent(&self, to: Party) -> u64 {
        self.send_seq[to.index()]
    }

    pub fn into_links(self) -> [Option<Box<dyn Link>>; 3] {
        self.links
    }
}
