//! Shamir `(t, n)` sharing over a prime field `F_p`, `p < 2^63`.
//!
//! Shares are evaluations of a random degree-`t` polynomial at `x = 1..=n`;
//! any `t + 1` of them recover the constant term by Lagrange interpolation.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShamirShare {
    pub x: u64,
    pub y: u64,
    pub prime: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShamirParams {
    pub threshold: usize,
    pub shares: usize,
    pub prime: u64,
}

impl ShamirParams {
    pub fn new(threshold: usize, shares: usize, prime: u64) -> Result<Self> {
        let params = Self { threshold, shares, prime };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold >= self.shares {
            return Err(Error::InvalidParams(format!(
                "threshold {} must be below share count {}",
                self.threshold, self.shares
            )));
        }
        if self.prime >= 1 << 63 || !is_prime(self.prime) {
            return Err(Error::InvalidParams(format!("{} is not a prime below 2^63", self.prime)));
        }
        if (self.shares as u64) >= self.prime {
            return Err(Error::InvalidParams(format!(
                "share count {} must be below the field size {}",
                self.shares, self.prime
            )));
        }
        Ok(())
    }
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 + b as u128) % p as u128) as u64
}

fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    add_mod(a, p - b % p, p)
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn eval_poly(coeffs: &[u64], x: u64, p: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| add_mod(mul_mod(acc, x, p), c, p))
}

pub fn shamir_share<R: RngCore + ?Sized>(secret: u64, params: &ShamirParams, rng: &mut R) -> Result<Vec<ShamirShare>> {
    params.validate()?;
    let coeffs: Vec<u64> = (0..params.threshold).map(|_| rng.gen_range(0..params.prime)).collect();
    share_with_coefficients(secret, &coeffs, params)
}

/// Shares `secret` with the given non-constant coefficients `q_1..q_t`.
pub fn share_with_coefficients(secret: u64, coeffs: &[u64], params: &ShamirParams) -> Result<Vec<ShamirShare>> {
    params.validate()?;
    if secret >= params.prime {
        return Err(Error::InvalidParams(format!("secret {secret} not in F_{}", params.prime)));
    }
    if coeffs.len() != params.threshold {
        return Err(Error::InvalidParams(format!("expected {} coefficients, got {}", params.threshold, coeffs.len())));
    }
    let p = params.prime;
    let poly: Vec<u64> = std::iter::once(secret).chain(coeffs.iter().map(|c| c % p)).collect();
    Ok((1..=params.shares as u64).map(|x| ShamirShare { x, y: eval_poly(&poly, x, p), prime: p }).collect())
}

/// Interpolates the first `t + 1` shares at zero.
pub fn shamir_reconstruct(shares: &[ShamirShare], params: &ShamirParams) -> Result<u64> {
    params.validate()?;
    let p = params.prime;
    let needed = params.threshold + 1;
    if shares.len() < needed {
        return Err(Error::InsufficientShares { needed, got: shares.len() });
    }
    for (i, s) in shares.iter().enumerate() {
        if s.prime != p || s.x == 0 || s.x >= p || s.y >= p {
            return Err(Error::MalformedShares(format!("share ({}, {}) is not a valid point in F_{p}", s.x, s.y)));
        }
        if shares[..i].iter().any(|o| o.x == s.x) {
            return Err(Error::MalformedShares(format!("duplicate evaluation point {}", s.x)));
        }
    }
    let used = &shares[..needed];
    let mut acc = 0;
    for (i, si) in used.iter().enumerate() {
        // l_i(0) = prod_{j != i} x_j / (x_j - x_i)
        let mut num = 1;
        let mut den = 1;
        for (j, sj) in used.iter().enumerate() {
            if i != j {
                num = mul_mod(num, sj.x, p);
                den = mul_mod(den, sub_mod(sj.x, si.x, p), p);
            }
        }
        let basis = mul_mod(num, inv_mod(den, p), p);
        acc = add_mod(acc, mul_mod(si.y, basis, p), p);
    }
    Ok(acc)
}
