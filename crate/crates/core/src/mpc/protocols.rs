//! Secure layer functions over additive shares.
//!
//! Every function is called by all three parties. Computing parties pass
//! their shares; the helper passes zero vectors of the same length and gets
//! zeros back, which keeps shape bookkeeping identical across roles.

use crate::error::{Error, Result};
use crate::mpc::triples::{deal_bits, deal_elementwise, deal_matrix};
use crate::mpc::{BeaverTriple, BitTriple, MatrixTriple, Party, PartyContext};
use crate::ring::{ring_matmul, Ring, Word};
use crate::wire::{bytes_to_ring, bytes_to_words, ring_to_bytes, words_to_bytes, MsgType};

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

fn zeros<W: Word>(n: usize) -> Vec<Ring<W>> {
    vec![Ring::zero(); n]
}

/// Adds a public constant to a shared vector (only `P0` adjusts its share).
pub fn add_public<W: Word>(party: Party, x: &[Ring<W>], c: Ring<W>) -> Vec<Ring<W>> {
    if party == Party::P0 {
        x.iter().map(|&v| v + c).collect()
    } else {
        x.to_vec()
    }
}

pub fn mul_public<W: Word>(x: &[Ring<W>], c: Ring<W>) -> Vec<Ring<W>> {
    x.iter().map(|&v| v * c).collect()
}

/// Reveals a shared vector to both computing parties.
pub fn open<W: Word>(ctx: &mut PartyContext<W>, share: &[Ring<W>]) -> Result<Vec<Ring<W>>> {
    let theirs = bytes_to_ring::<W>(&ctx.exchange(MsgType::BeaverOpen, ring_to_bytes(share))?)?;
    check_len("opening", theirs.len(), share.len())?;
    Ok(share.iter().zip(&theirs).map(|(&a, &b)| a + b).collect())
}

/// The masked values a party publishes in a Beaver multiplication:
/// `d_i = x_i - a_i` followed by `e_i = y_i - b_i`.
pub fn beaver_masks<W: Word>(x: &[Ring<W>], y: &[Ring<W>], triple: &BeaverTriple<W>) -> Vec<Ring<W>> {
    x.iter().zip(&triple.a).map(|(&x, &a)| x - a).chain(y.iter().zip(&triple.b).map(|(&y, &b)| y - b)).collect()
}

/// Output share `z_i = c_i + d b_i + e a_i (+ d e for P0)` from the opened
/// `d`, `e`.
pub fn beaver_combine<W: Word>(party: Party, d: &[Ring<W>], e: &[Ring<W>], triple: &BeaverTriple<W>) -> Vec<Ring<W>> {
    (0..d.len())
        .map(|i| {
            let mut z = triple.c[i] + d[i] * triple.b[i] + e[i] * triple.a[i];
            if party == Party::P0 {
                z += d[i] * e[i];
            }
            z
        })
        .collect()
}

/// Element-wise product using a caller-supplied triple.
pub fn mul_with_triple<W: Word>(
    ctx: &mut PartyContext<W>,
    x: &[Ring<W>],
    y: &[Ring<W>],
    triple: &BeaverTriple<W>,
) -> Result<Vec<Ring<W>>> {
    let n = x.len();
    check_len("mul rhs", y.len(), n)?;
    check_len("mul triple", triple.a.len(), n)?;
    ctx.consume_triple(triple.id)?;
    if ctx.is_dealer() {
        return Ok(zeros(n));
    }
    let opened = open(ctx, &beaver_masks(x, y, triple))?;
    let (d, e) = opened.split_at(n);
    Ok(beaver_combine(ctx.party(), d, e, triple))
}

pub fn mul<W: Word>(ctx: &mut PartyContext<W>, x: &[Ring<W>], y: &[Ring<W>]) -> Result<Vec<Ring<W>>> {
    check_len("mul rhs", y.len(), x.len())?;
    let triple = deal_elementwise(ctx, x.len())?;
    mul_with_triple(ctx, x, y, &triple)
}

/// Shared `m x k` by `k x n` matrix product.
pub fn matmul_with_triple<W: Word>(
    ctx: &mut PartyContext<W>,
    x: &[Ring<W>],
    w: &[Ring<W>],
    triple: &MatrixTriple<W>,
) -> Result<Vec<Ring<W>>> {
    let (m, k, n) = triple.dims;
    check_len("matmul lhs", x.len(), m * k)?;
    check_len("matmul rhs", w.len(), k * n)?;
    ctx.consume_triple(triple.id)?;
    if ctx.is_dealer() {
        return Ok(zeros(m * n));
    }
    let masks: Vec<Ring<W>> =
        x.iter().zip(&triple.a).map(|(&x, &a)| x - a).chain(w.iter().zip(&triple.b).map(|(&w, &b)| w - b)).collect();
    let opened = open(ctx, &masks)?;
    let (d, e) = opened.split_at(m * k);
    // Z_i = C_i + D (B_i + [P0] E) + A_i E
    let rhs: Vec<Ring<W>> = if ctx.party() == Party::P0 {
        triple.b.iter().zip(e).map(|(&b, &e)| b + e).collect()
    } else {
        triple.b.clone()
    };
    let de = ring_matmul(d, &rhs, m, k, n);
    let ae = ring_matmul(&triple.a, e, m, k, n);
    Ok(triple.c.iter().zip(de).zip(ae).map(|((&c, p), q)| c + p + q).collect())
}

pub fn matmul<W: Word>(
    ctx: &mut PartyContext<W>,
    x: &[Ring<W>],
    w: &[Ring<W>],
    (m, k, n): (usize, usize, usize),
) -> Result<Vec<Ring<W>>> {
    if x.len() != m * k || w.len() != k * n {
        return Err(Error::Shape(format!(
            "matmul of {} and {} elements does not fit {m}x{k} by {k}x{n}",
            x.len(),
            w.len()
        )));
    }
    let triple = deal_matrix(ctx, (m, k, n))?;
    matmul_with_triple(ctx, x, w, &triple)
}

/// Local truncation by `bits`: `P0` shifts its share arithmetically, `P1`
/// negates, shifts and negates back. The result is off by at most one unit
/// except with probability about `|x| / 2^w`.
pub fn truncate<W: Word>(party: Party, x: &[Ring<W>], bits: u32) -> Vec<Ring<W>> {
    match party {
        Party::P0 => x.iter().map(|v| v.shr_arith(bits)).collect(),
        Party::P1 => x.iter().map(|&v| -((-v).shr_arith(bits))).collect(),
        Party::P2 => x.to_vec(),
    }
}

pub fn truncate_shares<W: Word>(ctx: &PartyContext<W>, x: &[Ring<W>]) -> Vec<Ring<W>> {
    truncate(ctx.party(), x, ctx.codec().fraction_bits())
}

fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Bit plane `i` of `x`, packed 64 elements per word.
fn bit_plane<W: Word>(x: &[Ring<W>], i: u32) -> Vec<u64> {
    let mut plane = vec![0u64; words_for(x.len())];
    for (j, v) in x.iter().enumerate() {
        plane[j / 64] |= ((v.to_u64() >> i) & 1) << (j % 64);
    }
    plane
}

/// XOR-shared AND of bit planes with one bit triple.
fn and_planes<W: Word>(ctx: &mut PartyContext<W>, u: &[u64], v: &[u64], t: &BitTriple) -> Result<Vec<u64>> {
    ctx.consume_triple(t.id)?;
    let words = u.len();
    let mut msg = Vec::with_capacity(2 * words);
    msg.extend(u.iter().zip(&t.a).map(|(x, a)| x ^ a));
    msg.extend(v.iter().zip(&t.b).map(|(x, b)| x ^ b));
    let theirs = bytes_to_words(&ctx.exchange(MsgType::BitOpen, words_to_bytes(&msg))?)?;
    check_len("bit opening", theirs.len(), 2 * words)?;
    let p0 = ctx.party() == Party::P0;
    Ok((0..words)
        .map(|w| {
            let d = msg[w] ^ theirs[w];
            let e = msg[words + w] ^ theirs[words + w];
            let mut z = t.c[w] ^ (d & t.b[w]) ^ (e & t.a[w]);
            if p0 {
                z ^= d & e;
            }
            z
        })
        .collect())
}

/// Number of AND gates (bit triples) one sign extraction consumes.
pub fn msb_and_gates<W: Word>() -> usize {
    W::BITS as usize - 1
}

/// Arithmetic sharing of the sign bit using caller-supplied triples.
///
/// The computing parties add their own shares with a ripple-carry adder over
/// XOR shares: carry `c_{i+1} = ((a_i ^ c_i) & (b_i ^ c_i)) ^ c_i`, one AND
/// per bit, where `a` are `P0`'s bits and `b` are `P1`'s. The top sum bit
/// is then converted with `b0 + b1 - 2 b0 b1`.
pub fn msb_with_triples<W: Word>(
    ctx: &mut PartyContext<W>,
    x: &[Ring<W>],
    bit_triples: &[BitTriple],
    arith: &BeaverTriple<W>,
) -> Result<Vec<Ring<W>>> {
    let n = x.len();
    let gates = msb_and_gates::<W>();
    if bit_triples.len() < gates {
        return Err(Error::ProtocolMisuse(format!(
            "sign extraction needs {gates} bit triples, {} supplied",
            bit_triples.len()
        )));
    }
    let words = words_for(n);
    for t in bit_triples {
        check_len("bit triple", t.a.len(), words)?;
    }
    check_len("conversion triple", arith.a.len(), n)?;
    if ctx.is_dealer() {
        for t in &bit_triples[..gates] {
            ctx.consume_triple(t.id)?;
        }
        return mul_with_triple(ctx, &zeros(n), &zeros(n), arith);
    }
    let p0 = ctx.party() == Party::P0;
    let mut carry = vec![0u64; words];
    for (i, t) in bit_triples[..gates].iter().enumerate() {
        let own = bit_plane(x, i as u32);
        let (u, v): (Vec<u64>, Vec<u64>) = if p0 {
            (own.iter().zip(&carry).map(|(a, c)| a ^ c).collect(), carry.clone())
        } else {
            (carry.clone(), own.iter().zip(&carry).map(|(b, c)| b ^ c).collect())
        };
        let and = and_planes(ctx, &u, &v, t)?;
        carry = and.iter().zip(&carry).map(|(z, c)| z ^ c).collect();
    }
    let top = bit_plane(x, W::BITS - 1);
    let sign: Vec<u64> = top.iter().zip(&carry).map(|(a, c)| a ^ c).collect();
    let own_bits: Vec<Ring<W>> = (0..n).map(|j| Ring::from_u64((sign[j / 64] >> (j % 64)) & 1)).collect();
    // XOR-to-arithmetic: X = (s0, 0), Y = (0, s1), s0 ^ s1 = X + Y - 2 X Y
    let (xs, ys) = if p0 { (own_bits.clone(), zeros(n)) } else { (zeros(n), own_bits.clone()) };
    let prod = mul_with_triple(ctx, &xs, &ys, arith)?;
    let two = Ring::from_u64(2);
    Ok(own_bits.iter().zip(&prod).map(|(&s, &p)| s - two * p).collect())
}

/// Arithmetic sharing of `1` where `x` is negative in two's complement.
pub fn msb<W: Word>(ctx: &mut PartyContext<W>, x: &[Ring<W>]) -> Result<Vec<Ring<W>>> {
    let n = x.len();
    let bit_triples = deal_bits(ctx, msb_and_gates::<W>(), words_for(n))?;
    let arith = deal_elementwise(ctx, n)?;
    msb_with_triples(ctx, x, &bit_triples, &arith)
}

/// `max(0, x)` computed as `x * (1 - msb(x))`. Exact; no truncation.
pub fn relu<W: Word>(ctx: &mut PartyContext<W>, x: &[Ring<W>]) -> Result<Vec<Ring<W>>> {
    let sign = msb(ctx, x)?;
    let keep: Vec<Ring<W>> = add_public(ctx.party(), &mul_public(&sign, -Ring::one()), Ring::one());
    mul(ctx, x, &keep)
}

/// Maximum of each consecutive group of `window` elements, by a pairwise
/// tournament `max(a, b) = b + relu(a - b)`. All groups advance together, so
/// the round count depends only on `window`.
pub fn max_windows<W: Word>(ctx: &mut PartyContext<W>, values: &[Ring<W>], window: usize) -> Result<Vec<Ring<W>>> {
    if window == 0 || values.is_empty() || values.len() % window != 0 {
        return Err(Error::Shape(format!("cannot split {} values into windows of {window}", values.len())));
    }
    let groups = values.len() / window;
    let mut cur = values.to_vec();
    let mut width = window;
    while width > 1 {
        let half = width / 2;
        let odd = width % 2 == 1;
        let mut lhs = Vec::with_capacity(groups * half);
        let mut rhs = Vec::with_capacity(groups * half);
        for g in 0..groups {
            let base = g * width;
            for i in 0..half {
                lhs.push(cur[base + 2 * i]);
                rhs.push(cur[base + 2 * i + 1]);
            }
        }
        let diff: Vec<Ring<W>> = lhs.iter().zip(&rhs).map(|(&a, &b)| a - b).collect();
        let pos = relu(ctx, &diff)?;
        let next_width = half + usize::from(odd);
        let mut next = Vec::with_capacity(groups * next_width);
        for g in 0..groups {
            for i in 0..half {
                next.push(rhs[g * half + i] + pos[g * half + i]);
            }
            if odd {
                next.push(cur[g * width + width - 1]);
            }
        }
        cur = next;
        width = next_width;
    }
    Ok(cur)
}

pub fn max_tree<W: Word>(ctx: &mut PartyContext<W>, values: &[Ring<W>]) -> Result<Ring<W>> {
    if values.is_empty() {
        return Err(Error::Shape("maximum of an empty vector".into()));
    }
    Ok(max_windows(ctx, values, values.len())?[0])
}

/// Tournament depth for a window, `ceil(log2(window))`.
pub fn max_depth(window: usize) -> u32 {
    usize::BITS - window.saturating_sub(1).leading_zeros()
}

/// Fixed-point mean of each group of `window` elements: local sum, product
/// with the public constant `encode(1 / window)`, truncation.
pub fn avg_windows(ctx: &PartyContext<u64>, values: &[Ring<u64>], window: usize) -> Result<Vec<Ring<u64>>> {
    if window == 0 || values.len() % window != 0 {
        return Err(Error::Shape(format!("cannot split {} values into windows of {window}", values.len())));
    }
    let codec = ctx.codec();
    let inv = codec.encode(1.0 / window as f64)?;
    let scaled: Vec<Ring<u64>> =
        values.chunks_exact(window).map(|w| w.iter().copied().sum::<Ring<u64>>() * inv).collect();
    Ok(truncate_shares(ctx, &scaled))
}

pub fn avgpool(ctx: &PartyContext<u64>, values: &[Ring<u64>], window_size: usize) -> Result<Ring<u64>> {
    if window_size == 0 {
        return Err(Error::Shape("average over a window of size 0".into()));
    }
    if values.len() != window_size {
        return Err(Error::Shape(format!("window of {} values, declared size {window_size}", values.len())));
    }
    Ok(avg_windows(ctx, values, window_size)?[0])
}
