//! Correlated randomness dealt by the helper party.
//!
//! The helper samples `a`, `b`, computes `c = a * b` (element-wise, matrix
//! product, or bitwise AND), splits each into two additive (or XOR) shares
//! and sends one half to each computing party in a single
//! `TRIPLE_DELIVERY` frame. The helper's own copy is all zeros.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::mpc::{Party, PartyContext};
use crate::ring::{ring_matmul, Ring, Word};
use crate::wire::{bytes_to_words, words_to_bytes, MsgType};

/// Element-wise Beaver triple share: `c = a * b` after reconstruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeaverTriple<W> {
    pub id: u64,
    pub a: Vec<Ring<W>>,
    pub b: Vec<Ring<W>>,
    pub c: Vec<Ring<W>>,
}

/// Matrix Beaver triple share: `C = A B` with `A: m x k`, `B: k x n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixTriple<W> {
    pub id: u64,
    pub dims: (usize, usize, usize),
    pub a: Vec<Ring<W>>,
    pub b: Vec<Ring<W>>,
    pub c: Vec<Ring<W>>,
}

/// XOR-shared AND triple over bit planes packed 64 per word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTriple {
    pub id: u64,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

fn split<W: Word, R: RngCore + ?Sized>(values: &[Ring<W>], rng: &mut R) -> (Vec<Ring<W>>, Vec<Ring<W>>) {
    crate::sharing::additive::share_slice(values, rng)
}

fn random_vec<W: Word, R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<Ring<W>> {
    (0..n).map(|_| Ring::random(rng)).collect()
}

/// Samples an element-wise triple of length `n` and returns the two shares.
pub fn generate_elementwise<W: Word, R: RngCore + ?Sized>(id: u64, n: usize, rng: &mut R) -> [BeaverTriple<W>; 2] {
    let a = random_vec::<W, _>(n, rng);
    let b = random_vec::<W, _>(n, rng);
    let c: Vec<_> = a.iter().zip(&b).map(|(&x, &y)| x * y).collect();
    let (a0, a1) = split(&a, rng);
    let (b0, b1) = split(&b, rng);
    let (c0, c1) = split(&c, rng);
    [BeaverTriple { id, a: a0, b: b0, c: c0 }, BeaverTriple { id, a: a1, b: b1, c: c1 }]
}

pub fn generate_matrix<W: Word, R: RngCore + ?Sized>(
    id: u64,
    (m, k, n): (usize, usize, usize),
    rng: &mut R,
) -> [MatrixTriple<W>; 2] {
    let a = random_vec::<W, _>(m * k, rng);
    let b = random_vec::<W, _>(k * n, rng);
    let c = ring_matmul(&a, &b, m, k, n);
    let (a0, a1) = split(&a, rng);
    let (b0, b1) = split(&b, rng);
    let (c0, c1) = split(&c, rng);
    [
        MatrixTriple { id, dims: (m, k, n), a: a0, b: b0, c: c0 },
        MatrixTriple { id, dims: (m, k, n), a: a1, b: b1, c: c1 },
    ]
}

pub fn generate_bits<R: RngCore + ?Sized>(id: u64, words: usize, rng: &mut R) -> [BitTriple; 2] {
    let mut draw = || -> Vec<u64> { (0..words).map(|_| rng.next_u64()).collect() };
    let a = draw();
    let b = draw();
    let a0 = draw();
    let b0 = draw();
    let c0 = draw();
    let c: Vec<u64> = a.iter().zip(&b).map(|(x, y)| x & y).collect();
    let xor = |x: &[u64], y: &[u64]| -> Vec<u64> { x.iter().zip(y).map(|(p, q)| p ^ q).collect() };
    [
        BitTriple { id, a: a0.clone(), b: b0.clone(), c: c0.clone() },
        BitTriple { id, a: xor(&a, &a0), b: xor(&b, &b0), c: xor(&c, &c0) },
    ]
}

fn ring_words<W: Word>(v: &[Ring<W>]) -> impl Iterator<Item = u64> + '_ {
    v.iter().map(|x| x.to_u64())
}

fn take_ring<W: Word>(words: &[u64], at: &mut usize, n: usize) -> Vec<Ring<W>> {
    let out = words[*at..*at + n].iter().map(|&w| Ring::from_u64(w)).collect();
    *at += n;
    out
}

fn deliver<W: Word>(ctx: &mut PartyContext<W>, shares: [Vec<u64>; 2]) -> Result<()> {
    let [s0, s1] = shares;
    ctx.send(Party::P0, MsgType::TripleDelivery, words_to_bytes(&s0))?;
    ctx.send(Party::P1, MsgType::TripleDelivery, words_to_bytes(&s1))?;
    Ok(())
}

fn receive<W: Word>(ctx: &mut PartyContext<W>, expected: usize) -> Result<Vec<u64>> {
    let words = bytes_to_words(&ctx.recv(Party::P2, MsgType::TripleDelivery)?)?;
    if words.len() != expected {
        return Err(Error::Desync(format!("triple delivery of {} words, expected {expected}", words.len())));
    }
    Ok(words)
}

/// Obtains one element-wise triple of length `n`: the helper deals it, the
/// computing parties receive their halves.
pub fn deal_elementwise<W: Word>(ctx: &mut PartyContext<W>, n: usize) -> Result<BeaverTriple<W>> {
    let id = ctx.issue_triple_id();
    if ctx.is_dealer() {
        let shares = generate_elementwise::<W, _>(id, n, ctx.dealer_rng()?);
        let payload =
            shares.map(|t| ring_words(&t.a).chain(ring_words(&t.b)).chain(ring_words(&t.c)).collect::<Vec<u64>>());
        deliver(ctx, payload)?;
        let z = vec![Ring::zero(); n];
        return Ok(BeaverTriple { id, a: z.clone(), b: z.clone(), c: z });
    }
    let words = receive(ctx, 3 * n)?;
    let mut at = 0;
    Ok(BeaverTriple {
        id,
        a: take_ring(&words, &mut at, n),
        b: take_ring(&words, &mut at, n),
        c: take_ring(&words, &mut at, n),
    })
}

pub fn deal_matrix<W: Word>(ctx: &mut PartyContext<W>, dims: (usize, usize, usize)) -> Result<MatrixTriple<W>> {
    let (m, k, n) = dims;
    let id = ctx.issue_triple_id();
    if ctx.is_dealer() {
        let shares = generate_matrix::<W, _>(id, dims, ctx.dealer_rng()?);
        let payload =
            shares.map(|t| ring_words(&t.a).chain(ring_words(&t.b)).chain(ring_words(&t.c)).collect::<Vec<u64>>());
        deliver(ctx, payload)?;
        return Ok(MatrixTriple {
            id,
            dims,
            a: vec![Ring::zero(); m * k],
            b: vec![Ring::zero(); k * n],
            c: vec![Ring::zero(); m * n],
        });
    }
    let words = receive(ctx, m * k + k * n + m * n)?;
    let mut at = 0;
    Ok(MatrixTriple {
        id,
        dims,
        a: take_ring(&words, &mut at, m * k),
        b: take_ring(&words, &mut at, k * n),
        c: take_ring(&words, &mut at, m * n),
    })
}

/// Obtains `count` bit triples, each over `words` packed words, in one
/// delivery.
pub fn deal_bits<W: Word>(ctx: &mut PartyContext<W>, count: usize, words: usize) -> Result<Vec<BitTriple>> {
    let ids: Vec<u64> = (0..count).map(|_| ctx.issue_triple_id()).collect();
    if ctx.is_dealer() {
        let mut payload = [Vec::new(), Vec::new()];
        let rng = ctx.dealer_rng()?;
        for &id in &ids {
            let [t0, t1] = generate_bits(id, words, rng);
            for (buf, t) in payload.iter_mut().zip([t0, t1]) {
                buf.extend_from_slice(&t.a);
                buf.extend_from_slice(&t.b);
                buf.extend_from_slice(&t.c);
            }
        }
        deliver(ctx, payload)?;
        return Ok(ids
            .into_iter()
            .map(|id| BitTriple { id, a: vec![0; words], b: vec![0; words], c: vec![0; words] })
            .collect());
    }
    let all = receive(ctx, count * 3 * words)?;
    Ok(ids
        .into_iter()
        .zip(all.chunks_exact(3 * words.max(1)))
        .map(|(id, chunk)| BitTriple {
            id,
            a: chunk[..words].to_vec(),
            b: chunk[words..2 * words].to_vec(),
            c: chunk[2 * words..3 * words].to_vec(),
        })
        .collect())
}
