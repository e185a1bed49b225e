use rand::RngCore;

use crate::error::{Error, Result};
use crate::ring::{Ring, Word};

/// One party's additive share: `x = x0 + x1 mod 2^w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdditiveShare<W> {
    pub party: u8,
    pub value: Ring<W>,
}

/// Splits `secret` with `x0` drawn uniformly from the ring.
pub fn additive_share<W: Word, R: RngCore + ?Sized>(
    secret: Ring<W>,
    rng: &mut R,
) -> (AdditiveShare<W>, AdditiveShare<W>) {
    share_with_mask(secret, Ring::random(rng))
}

/// Splits `secret` using a caller-chosen first share.
pub fn share_with_mask<W: Word>(secret: Ring<W>, mask: Ring<W>) -> (AdditiveShare<W>, AdditiveShare<W>) {
    (AdditiveShare { party: 0, value: mask }, AdditiveShare { party: 1, value: secret - mask })
}

pub fn additive_reconstruct<W: Word>(s0: AdditiveShare<W>, s1: AdditiveShare<W>) -> Result<Ring<W>> {
    if s0.party == s1.party {
        return Err(Error::MalformedShares(format!("both shares claim party {}", s0.party)));
    }
    if s0.party > 1 || s1.party > 1 {
        return Err(Error::MalformedShares("additive shares belong to parties 0 and 1".into()));
    }
    Ok(s0.value + s1.value)
}

/// Element-wise sharing of a tensor; returns the party-0 and party-1 vectors.
pub fn share_slice<W: Word, R: RngCore + ?Sized>(secrets: &[Ring<W>], rng: &mut R) -> (Vec<Ring<W>>, Vec<Ring<W>>) {
    secrets
        .iter()
        .map(|&s| {
            let mask = Ring::random(rng);
            (mask, s - mask)
        })
        .unzip()
}

pub fn reconstruct_slice<W: Word>(s0: &[Ring<W>], s1: &[Ring<W>]) -> Result<Vec<Ring<W>>> {
    if s0.len() != s1.len() {
        return Err(Error::Shape(format!("share vectors of length {} and {}", s0.len(), s1.len())));
    }
    Ok(s0.iter().zip(s1).map(|(&a, &b)| a + b).collect())
}
