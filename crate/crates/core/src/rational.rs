//! Exact rational substrate.
//!
//! All endpoints, slopes and masses are arbitrary-precision rationals. The
//! textual form is `"p/q"` (or a bare integer `"p"`), which is also what the
//! JSON documents carry.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

/// Builds `num/den` from machine integers.
///
/// Panics if `den == 0`.
pub fn q(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

/// `"p/q"`, or `"p"` for integers.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Extremely unbalanced numerator/denominator; fall back to logs.
        let l = log2(&x.abs());
        let v = l.exp2();
        if x.is_negative() {
            -v
        } else {
            v
        }
    })
}

fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        return (n.to_u64().expect("fits") as f64).log2();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().expect("fits");
    (top as f64).log2() + shift as f64
}

/// Base-2 logarithm of a positive rational, accurate for values far outside
/// the `f64` range.
///
/// Panics if `x <= 0`.
pub fn log2(x: &Rational) -> f64 {
    assert!(x.is_positive(), "log2 of non-positive rational");
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    if let (Some(a), Some(b)) = (num.to_u64(), den.to_u64()) {
        // Exact powers of two stay exact.
        if a.is_power_of_two() && b.is_power_of_two() {
            return a.trailing_zeros() as f64 - b.trailing_zeros() as f64;
        }
        if a < (1 << 53) && b < (1 << 53) {
            return ((a as f64) / (b as f64)).log2();
        }
    }
    log2_biguint(num) - log2_biguint(den)
}

/// `p * log2(1/p)` in bits, with `0 log 0 = 0`.
pub fn plogp_bits(p: &Rational) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    -to_f64(p) * log2(p)
}

pub fn is_integer(x: &Rational) -> bool {
    x.denom().is_one()
}

pub fn from_biguint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

/// Serde adapter storing a rational as a `"p/q"` string.
pub mod serde_str {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
