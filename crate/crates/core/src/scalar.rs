//! Exact rational scalars.
//!
//! Every position, mass and bound in this crate is a [`Rational`]. The text
//! form is a decimal-free fraction string (`"-15/16"`, `"3"`); parsing
//! rejects anything else so that files and CLI arguments stay exact.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Error;

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `2^-e` for a non-negative exponent.
pub fn pow2_neg(e: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << e as usize)
}

pub fn pow3(e: u32) -> Rational {
    Rational::from_integer(num_traits::pow(BigInt::from(3), e as usize))
}

/// Integer power with a non-negative exponent.
pub fn powi(base: &Rational, e: usize) -> Rational {
    num_traits::pow(base.clone(), e)
}

/// Parses a fraction string `p/q` or an integer `p`. Decimal points and
/// exponents are rejected.
pub fn parse(s: &str) -> Result<Rational, Error> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not an exact fraction: {s:?}"));
    if t.is_empty() || t.contains(['.', 'e', 'E']) {
        return Err(bad());
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| bad())?;
    let den = BigInt::from_str(den).map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Canonical fraction string: `p/q`, or `p` for integers.
pub fn fmt(r: &Rational) -> String {
    r.to_string()
}

/// Truncated decimal expansion with `digits` fractional digits. For display
/// only; callers mark it as approximate.
pub fn to_decimal(r: &Rational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (r.abs() * Rational::from_integer(scale.clone()))
        .trunc()
        .to_integer();
    let (whole, rem) = scaled.div_rem(&scale);
    let sign = if r.is_negative() { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{:0>width$}", rem.to_string(), width = digits)
    }
}

/// Nearest integer, ties rounded towards +inf.
pub fn nearest_integer(r: &Rational) -> BigInt {
    (r + frac(1, 2)).floor().to_integer()
}

pub fn max_of<'a>(it: impl IntoIterator<Item = &'a Rational>) -> Option<Rational> {
    it.into_iter().max().cloned()
}

/// Serde helper: a [`Rational`] as a fraction string.
pub mod fraction {
    use super::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::fmt(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(de::Error::custom)
    }
}

/// Serde helper for `Option<Rational>`.
pub mod fraction_opt {
    use super::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&super::fmt(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| super::parse(&s).map_err(de::Error::custom))
            .transpose()
    }
}

/// Serde helper for `Vec<Rational>`.
pub mod fraction_vec {
    use super::Rational;
    use serde::ser::SerializeSeq;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&super::fmt(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        v.iter()
            .map(|s| super::parse(s).map_err(de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_accepts_fractions_and_integers() {
        assert_eq!(parse("-15/16").unwrap(), frac(-15, 16));
        assert_eq!(parse("6/8").unwrap(), frac(3, 4));
        assert_eq!(parse(" 7 ").unwrap(), int(7));
        assert_eq!(parse("3/-4").unwrap(), frac(-3, 4));
    }

    #[test]
    fn parse_rejects_decimals_and_garbage() {
        for s in ["0.5", "1e3", "", "1/0", "a/b", "1//2"] {
            assert!(parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn canonical_form() {
        let r = frac(10, -4);
        assert_eq!(r.numer(), &BigInt::from(-5));
        assert_eq!(r.denom(), &BigInt::from(2));
        assert_eq!(fmt(&r), "-5/2");
        assert_eq!(fmt(&int(3)), "3");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal(&frac(9, 1024), 6), "0.008789");
        assert_eq!(to_decimal(&frac(-1, 3), 3), "-0.333");
        assert_eq!(to_decimal(&int(2), 0), "2");
    }

    #[test]
    fn powers() {
        assert_eq!(pow2_neg(4), frac(1, 16));
        assert_eq!(pow3(4), int(81));
        assert_eq!(powi(&frac(1, 2), 3), frac(1, 8));
        assert_eq!(powi(&frac(1, 2), 0), int(1));
    }

    #[test]
    fn rounding() {
        assert_eq!(nearest_integer(&frac(-17, 16)), BigInt::from(-1));
        assert_eq!(nearest_integer(&frac(5, 2)), BigInt::from(3));
        assert_eq!(nearest_integer(&frac(-1, 3)), BigInt::from(0));
    }
}
