//! Runs the three parties as threads of one process over in-memory links.

use std::thread;

use crate::error::{Error, Result};
use crate::link::{derive_key, MemoryLink, TranscriptSink};
use crate::mpc::{Party, PartyContext};
use crate::ring::{FixedPointCodec, Word};
use crate::wire::SessionId;

#[derive(Clone)]
pub struct LocalSetup {
    pub session: SessionId,
    pub codec: FixedPointCodec,
    /// Master seed; the helper's generator is derived from it and the
    /// session id.
    pub dealer_seed: [u8; 32],
    pub transcripts: [Option<TranscriptSink>; 3],
}

impl LocalSetup {
    pub fn new(session: SessionId, codec: FixedPointCodec, dealer_seed: [u8; 32]) -> Self {
        Self { session, codec, dealer_seed, transcripts: [None, None, None] }
    }

    pub fn seeded(seed: u64) -> Self {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        Self::new(SessionId(s[..16].try_into().unwrap()), FixedPointCodec::default(), s)
    }
}

/// Per-session helper seed derived from a long-lived master seed.
pub fn session_dealer_seed(master: &[u8; 32], session: SessionId) -> [u8; 32] {
    derive_key(master, "privnet-dealer", session)
}

/// Builds three connected contexts; index `i` belongs to party `i`.
pub fn local_contexts<W: Word>(setup: &LocalSetup) -> [PartyContext<W>; 3] {
    let (l01, l10) = MemoryLink::pair();
    let (l02, l20) = MemoryLink::pair();
    let (l12, l21) = MemoryLink::pair();
    let mut p0 = PartyContext::new(Party::P0, setup.session, setup.codec)
        .with_link(Party::P1, Box::new(l01))
        .with_link(Party::P2, Box::new(l02));
    let mut p1 = PartyContext::new(Party::P1, setup.session, setup.codec)
        .with_link(Party::P0, Box::new(l10))
        .with_link(Party::P2, Box::new(l12));
    let mut p2 = PartyContext::new(Party::P2, setup.session, setup.codec)
        .with_link(Party::P0, Box::new(l20))
        .with_link(Party::P1, Box::new(l21))
        .with_dealer_seed(session_dealer_seed(&setup.dealer_seed, setup.session));
    if let Some(t) = &setup.transcripts[0] {
        p0 = p0.with_transcript(t.clone());
    }
    if let Some(t) = &setup.transcripts[1] {
        p1 = p1.with_transcript(t.clone());
    }
    if let Some(t) = &setup.transcripts[2] {
        p2 = p2.with_transcript(t.clone());
    }
    [p0, p1, p2]
}

fn is_secondary(e: &Error) -> bool {
    matches!(e, Error::Aborted(_) | Error::ChannelClosed { .. })
}

/// Runs `f` once per party on its own thread and collects the results in
/// party order. On failure the root-cause error is returned rather than
/// the aborts it triggered in the other parties.
pub fn run_local<W, T, F>(setup: &LocalSetup, f: F) -> Result<[T; 3]>
where
    W: Word,
    T: Send,
    F: Fn(&mut PartyContext<W>) -> Result<T> + Sync,
{
    let contexts = local_contexts::<W>(setup);
    let results: Vec<Result<T>> = thread::scope(|s| {
        let handles: Vec<_> = contexts
            .into_iter()
            .map(|mut ctx| {
                let f = &f;
                s.spawn(move || {
                    let out = f(&mut ctx);
                    if let Err(e) = &out {
                        ctx.abort(&e.to_string());
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("party thread panicked")).collect()
    });
    if results.iter().any(Result::is_err) {
        let mut errors: Vec<Error> = results.into_iter().filter_map(Result::err).collect();
        let pos = errors.iter().position(|e| !is_secondary(e)).unwrap_or(0);
        return Err(errors.swap_remove(pos));
    }
    let mut it = results.into_iter().map(|r| r.ok().unwrap());
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}
