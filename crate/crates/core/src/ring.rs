//! Wrapping arithmetic in `Z_{2^w}` and the fixed-point codec.
//!
//! Production code uses `w = 64`. The width is a type parameter only so the
//! protocols can be checked exhaustively against an 8-bit ring.

use std::fmt;
use std::hash::Hash;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::RngCore;

use crate::error::{Error, Result};

/// Machine word backing a ring `Z_{2^BITS}`.
pub trait Word: Copy + Eq + Ord + Hash + Default + fmt::Debug + fmt::Display + Send + Sync + 'static {
    const BITS: u32;

    fn wrapping_add(self, rhs: Self) -> Self;
    fn wrapping_sub(self, rhs: Self) -> Self;
    fn wrapping_mul(self, rhs: Self) -> Self;
    fn wrapping_neg(self) -> Self;
    /// Keeps the low `BITS` bits.
    fn from_u64(v: u64) -> Self;
    fn to_u64(self) -> u64;
    /// Two's-complement interpretation.
    fn to_signed(self) -> i64;
}

macro_rules! impl_word {
    ($t:ty, $s:ty) => {
        impl Word for $t {
            const BITS: u32 = <$t>::BITS;

            #[inline]
            fn wrapping_add(self, rhs: Self) -> Self {
                <$t>::wrapping_add(self, rhs)
            }
            #[inline]
            fn wrapping_sub(self, rhs: Self) -> Self {
                <$t>::wrapping_sub(self, rhs)
            }
            #[inline]
            fn wrapping_mul(self, rhs: Self) -> Self {
                <$t>::wrapping_mul(self, rhs)
            }
            #[inline]
            fn wrapping_neg(self) -> Self {
                <$t>::wrapping_neg(self)
            }
            #[inline]
            fn from_u64(v: u64) -> Self {
                v as $t
            }
            #[inline]
            fn to_u64(self) -> u64 {
                self as u64
            }
            #[inline]
            fn to_signed(self) -> i64 {
                self as $s as i64
            }
        }
    };
}

impl_word!(u8, i8);
impl_word!(u16, i16);
impl_word!(u32, i32);
impl_word!(u64, i64);

/// An element of `Z_{2^w}`. All operators wrap.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(transparent)]
pub struct Ring<W>(pub W);

/// The production ring, `Z_{2^64}`.
pub type RingElement = Ring<u64>;

impl<W: Word> Ring<W> {
    pub fn zero() -> Self {
        Ring(W::from_u64(0))
    }

    pub fn one() -> Self {
        Ring(W::from_u64(1))
    }

    pub fn from_u64(v: u64) -> Self {
        Ring(W::from_u64(v))
    }

    pub fn to_u64(self) -> u64 {
        self.0.to_u64()
    }

    pub fn to_signed(self) -> i64 {
        self.0.to_signed()
    }

    pub fn from_signed(v: i64) -> Self {
        Ring(W::from_u64(v as u64))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Ring(W::from_u64(rng.next_u64()))
    }

    #[inline]
    pub fn bit(self, i: u32) -> bool {
        (self.0.to_u64() >> i) & 1 == 1
    }

    /// Most significant bit, i.e. the two's-complement sign.
    pub fn msb(self) -> bool {
        self.bit(W::BITS - 1)
    }

    /// Arithmetic right shift (sign-extending, rounds toward -inf).
    pub fn shr_arith(self, bits: u32) -> Self {
        Self::from_signed(self.to_signed() >> bits)
    }
}

impl<W: fmt::Debug> fmt::Debug for Ring<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring({:?})", self.0)
    }
}

impl<W: fmt::Display> fmt::Display for Ring<W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl<W: Word> Add for Ring<W> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Ring(self.0.wrapping_add(rhs.0))
    }
}

impl<W: Word> Sub for Ring<W> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Ring(self.0.wrapping_sub(rhs.0))
    }
}

impl<W: Word> Mul for Ring<W> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Ring(self.0.wrapping_mul(rhs.0))
    }
}

impl<W: Word> Neg for Ring<W> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Ring(self.0.wrapping_neg())
    }
}

impl<W: Word> AddAssign for Ring<W> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<W: Word> SubAssign for Ring<W> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<W: Word> MulAssign for Ring<W> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<W: Word> Sum for Ring<W> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), Add::add)
    }
}

pub fn ring_add<W: Word>(a: Ring<W>, b: Ring<W>) -> Ring<W> {
    a + b
}

pub fn ring_sub<W: Word>(a: Ring<W>, b: Ring<W>) -> Ring<W> {
    a - b
}

pub fn ring_mul<W: Word>(a: Ring<W>, b: Ring<W>) -> Ring<W> {
    a * b
}

/// Row-major `m x k` by `k x n` product in the ring.
pub fn ring_matmul<W: Word>(a: &[Ring<W>], b: &[Ring<W>], m: usize, k: usize, n: usize) -> Vec<Ring<W>> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![Ring::<W>::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Maps reals to `Z_{2^64}` as `round(x * 2^f)` in two's complement.
///
/// `magnitude_bits` (k) bounds plaintexts to `|x| < 2^k`; with `k + f <= 60`
/// a single product followed by truncation stays clear of wraparound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointCodec {
    fraction_bits: u32,
    magnitude_bits: u32,
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        Self { fraction_bits: 13, magnitude_bits: 20 }
    }
}

impl FixedPointCodec {
    pub fn new(fraction_bits: u32, magnitude_bits: u32) -> Result<Self> {
        if !(1..=30).contains(&fraction_bits) {
            return Err(Error::InvalidCodec(format!("fraction bits {fraction_bits} outside 1..=30")));
        }
        if fraction_bits + magnitude_bits > 60 {
            return Err(Error::InvalidCodec(format!("k + f = {} exceeds 60", fraction_bits + magnitude_bits)));
        }
        Ok(Self { fraction_bits, magnitude_bits })
    }

    pub fn fraction_bits(&self) -> u32 {
        self.fraction_bits
    }

    pub fn magnitude_bits(&self) -> u32 {
        self.magnitude_bits
    }

    /// One unit in the last place, `2^-f`.
    pub fn ulp(&self) -> f64 {
        (-(self.fraction_bits as f64)).exp2()
    }

    pub fn scale(&self) -> f64 {
        (self.fraction_bits as f64).exp2()
    }

    /// Round-half-away-from-zero encoding.
    pub fn encode(&self, x: f64) -> Result<RingElement> {
        let bound = (self.magnitude_bits as f64).exp2();
        if !(x.abs() < bound) {
            return Err(Error::EncodeOverflow { value: x, bound_bits: self.magnitude_bits });
        }
        Ok(Ring::from_signed((x * self.scale()).round() as i64))
    }

    pub fn encode_slice(&self, xs: &[f64]) -> Result<Vec<RingElement>> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode(&self, e: RingElement) -> f64 {
        e.to_signed() as f64 / self.scale()
    }

    pub fn decode_slice(&self, es: &[RingElement]) -> Vec<f64> {
        es.iter().map(|&e| self.decode(e)).collect()
    }

    /// Rescales a product of two encodings back to `2^f`.
    pub fn truncate_public(&self, e: RingElement) -> RingElement {
        e.shr_arith(self.fraction_bits)
    }

    /// Upper bound on the per-truncation failure probability of local share
    /// truncation, `2^(k + f - 63)`.
    pub fn truncation_failure_bound(&self) -> f64 {
        ((self.magnitude_bits + self.fraction_bits) as f64 - 63.0).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let c = FixedPointCodec::default();
        assert_eq!(c.encode(1.5).unwrap(), Ring(12288));
        assert_eq!(c.encode(0.0).unwrap(), Ring(0));
        assert_eq!(c.encode(-1.0).unwrap(), Ring(0u64.wrapping_sub(8192)));
        assert_eq!(c.decode(Ring(12288)), 1.5);
        assert_eq!(c.decode(Ring(0u64.wrapping_sub(8192))), -1.0);
    }

    #[test]
    fn encode_rounds_half_away_from_zero() {
        let c = FixedPointCodec::new(1, 20).unwrap();
        assert_eq!(c.encode(0.25).unwrap(), Ring(1));
        assert_eq!(c.encode(-0.25).unwrap(), Ring::from_signed(-1));
        assert_eq!(c.encode(0.75).unwrap(), Ring(2));
        assert_eq!(c.encode(-0.75).unwrap(), Ring::from_signed(-2));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let c = FixedPointCodec::default();
        assert!(matches!(c.encode(1048576.0), Err(Error::EncodeOverflow { .. })));
        assert!(c.encode(-1048576.0).is_err());
        assert!(c.encode(f64::NAN).is_err());
        assert!(c.encode(1048575.5).is_ok());
    }

    #[test]
    fn codec_validation() {
        assert!(FixedPointCodec::new(0, 20).is_err());
        assert!(FixedPointCodec::new(31, 10).is_err());
        assert!(FixedPointCodec::new(30, 31).is_err());
        assert!(FixedPointCodec::new(30, 30).is_ok());
    }

    #[test]
    fn wraparound() {
        assert_eq!(ring_add(Ring(u64::MAX), Ring(1)), Ring(0));
        assert_eq!(ring_mul(Ring(3u64), Ring(4)), Ring(12));
        assert_eq!(ring_sub(Ring(0u8), Ring(1)), Ring(255));
    }

    #[test]
    fn truncate_public_examples() {
        let c = FixedPointCodec::default();
        let p = c.encode(1.5).unwrap() * c.encode(2.0).unwrap();
        assert_eq!(c.truncate_public(p), c.encode(3.0).unwrap());
        let q = c.encode(-4.0).unwrap() * c.encode(0.5).unwrap();
        assert_eq!(c.truncate_public(q), c.encode(-2.0).unwrap());
        assert_eq!(c.truncate_public(Ring(0)), Ring(0));
    }

    #[test]
    fn msb_and_shift() {
        assert!(!Ring(1u64).msb());
        assert!(Ring(1u64 << 63).msb());
        assert!(Ring(0x80u8).msb());
        assert_eq!(Ring::<u8>::from_signed(-8).shr_arith(2), Ring::from_signed(-2));
        assert_eq!(Ring::<u8>::from_signed(-7).shr_arith(2), Ring::from_signed(-2));
    }
}
