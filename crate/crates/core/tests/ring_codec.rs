use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive};
use privnet_core::ring::{ring_add, ring_mul, ring_sub};
use privnet_core::{FixedPointCodec, Ring};
use proptest::prelude::*;

#[test]
fn width8_matches_schoolbook_mod_256() {
    for a in 0..256u32 {
        for b in 0..256u32 {
            let (ra, rb) = (Ring(a as u8), Ring(b as u8));
            assert_eq!(ring_add(ra, rb).0 as u32, (a + b) % 256);
            assert_eq!(ring_sub(ra, rb).0 as u32, (a + 256 - b) % 256);
            assert_eq!(ring_mul(ra, rb).0 as u32, (a * b) % 256);
        }
    }
}

/// decode(encode(pi)) against an exact rational: |decoded - pi| <= 2^-(f+1).
#[test]
fn pi_roundtrip_against_rational_oracle() {
    let codec = FixedPointCodec::default();
    // 40 digits of pi as an exact fraction
    let pi = BigRational::new(
        "31415926535897932384626433832795028841971".parse::<BigInt>().unwrap(),
        BigInt::from(10u8).pow(40),
    );
    let decoded = codec.decode(codec.encode(std::f64::consts::PI).unwrap());
    let decoded = BigRational::from_f64(decoded).unwrap();
    let err = (decoded - pi).abs();
    let bound = BigRational::new(BigInt::from(1), BigInt::from(1u64 << 14));
    assert!(err <= bound, "error {}", err.to_f64().unwrap());
}

#[test]
fn truncate_public_against_rational_oracle() {
    let codec = FixedPointCodec::default();
    for (x, y) in [(1.5, 2.0), (-4.0, 0.5), (0.125, -3.0), (7.75, 7.75)] {
        let prod = codec.encode(x).unwrap() * codec.encode(y).unwrap();
        let got = codec.decode(codec.truncate_public(prod));
        let exact = BigRational::from_f64(x).unwrap() * BigRational::from_f64(y).unwrap();
        assert_eq!(BigRational::from_f64(got).unwrap(), exact);
    }
}

proptest! {
    #[test]
    fn encode_decode_within_half_ulp(x in -1.0e6f64..1.0e6) {
        let codec = FixedPointCodec::default();
        let back = codec.decode(codec.encode(x).unwrap());
        prop_assert!((back - x).abs() <= codec.ulp() / 2.0 + 1e-12);
    }

    #[test]
    fn encoded_addition(x in -4.0e5f64..4.0e5, y in -4.0e5f64..4.0e5) {
        let codec = FixedPointCodec::default();
        let s = codec.decode(codec.encode(x).unwrap() + codec.encode(y).unwrap());
        prop_assert!((s - (x + y)).abs() <= codec.ulp() + 1e-9);
    }

    #[test]
    fn encoded_product_after_truncation(x in -1000.0f64..1000.0, y in -1000.0f64..1000.0) {
        let codec = FixedPointCodec::default();
        let p = codec.encode(x).unwrap() * codec.encode(y).unwrap();
        let got = codec.decode(codec.truncate_public(p));
        // encoding error of each factor propagates through the other
        let tol = 2.0 * codec.ulp() + (x.abs() + y.abs()) * codec.ulp() / 2.0;
        prop_assert!((got - x * y).abs() <= tol, "{} vs {}", got, x * y);
    }
}
