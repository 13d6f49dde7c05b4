//! Numeric abstractions.
//!
//! Scores and tie weights are exact by default ([`crate::Score`] is a big
//! rational), while centralities and modularity are computed in a float type.
//! Both sides are expressed as traits over `num-traits` so the math can be
//! exercised with any conforming type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// A score-carrying number: option values, formula results, band edges and
/// tie weights.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// Converts an exact rational literal; `None` when it cannot be represented.
    fn from_rational(r: &BigRational) -> Option<Self>;

    /// Lossy view used by the float-side analytics.
    fn to_f64_lossy(&self) -> f64;

    fn is_finite_value(&self) -> bool {
        true
    }

    fn from_count(n: usize) -> Self {
        let mut acc = Self::zero();
        let one = Self::one();
        // counts here are tiny (number of formula refs)
        for _ in 0..n {
            acc = acc + one.clone();
        }
        acc
    }

    /// Canonical text: integers as `7`, fractions as `7/2`.
    fn to_text(&self) -> String {
        self.to_string()
    }

    /// Accepts `7`, `-7`, `7/2` and decimal `3.25`.
    fn parse_text(s: &str) -> Option<Self> {
        parse_rational(s).and_then(|r| Self::from_rational(&r))
    }
}

/// Float type used for centralities, modularity and correlations.
pub trait RealScalar: Float + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static {}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
}

impl Scalar for Ratio<i64> {
    fn from_rational(r: &BigRational) -> Option<Self> {
        let n = r.numer().to_i64()?;
        let d = r.denom().to_i64()?;
        Some(Ratio::new(n, d))
    }

    fn to_f64_lossy(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Option<Self> {
        r.to_f64()
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn to_text(&self) -> String {
        format!("{self}")
    }

    fn parse_text(s: &str) -> Option<Self> {
        s.trim().parse().ok().or_else(|| parse_rational(s)?.to_f64())
    }
}

/// Parses `7`, `-7`, `7/2`, `3.25` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10u8), frac_part.len());
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// Renders a scalar as a short decimal for human-facing text (two places at most).
pub fn display_decimal<S: Scalar>(value: &S) -> String {
    let x = value.to_f64_lossy();
    let rounded = (x * 100.0).round() / 100.0;
    if rounded == rounded.trunc() {
        format!("{}", rounded as i64)
    } else {
        let s = format!("{rounded:.2}");
        s.trim_end_matches('0').to_string()
    }
}

/// Exact integer conversion for rationals that are whole numbers.
pub fn as_integer(value: &BigRational) -> Option<i64> {
    if value.denom().is_one() {
        value.numer().to_i64()
    } else {
        None
    }
}

/// Serde adapter that writes scalars in their canonical text form and reads
/// either strings or JSON numbers.
pub mod text {
    use super::Scalar;
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;
    use std::marker::PhantomData;

    pub fn serialize<S: Scalar, Ser: Serializer>(value: &S, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
        ser.serialize_str(&value.to_text())
    }

    struct ScalarVisitor<S>(PhantomData<S>);

    impl<'de, S: Scalar> Visitor<'de> for ScalarVisitor<S> {
        type Value = S;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or a rational string such as \"7/2\"")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<S, E> {
            S::parse_text(v).ok_or_else(|| E::custom(format!("invalid number `{v}`")))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<S, E> {
            self.visit_str(&v.to_string())
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<S, E> {
            self.visit_str(&v.to_string())
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<S, E> {
            self.visit_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, S: Scalar, D: Deserializer<'de>>(de: D) -> Result<S, D::Error> {
        de.deserialize_any(ScalarVisitor(PhantomData))
    }

    /// Same encoding for `Option<S>`.
    pub mod option {
        use super::super::Scalar;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Scalar, Ser: Serializer>(value: &Option<S>, ser: Ser) -> Result<Ser::Ok, Ser::Error> {
            match value {
                Some(v) => ser.serialize_some(&v.to_text()),
                None => ser.serialize_none(),
            }
        }

        pub fn deserialize<'de, S: Scalar, D: Deserializer<'de>>(de: D) -> Result<Option<S>, D::Error> {
            #[derive(Deserialize)]
            #[serde(untagged)]
            enum Raw {
                Text(String),
                Int(i64),
                Float(f64),
            }
            let raw: Option<Raw> = Option::deserialize(de)?;
            match raw {
                None => Ok(None),
                Some(Raw::Text(s)) => S::parse_text(&s)
                    .map(Some)
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid number `{s}`"))),
                Some(Raw::Int(i)) => Ok(S::parse_text(&i.to_string())),
                Some(Raw::Float(f)) => Ok(S::parse_text(&f.to_string())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_integers_fractions_and_decimals() {
        assert_eq!(parse_rational("7"), Some(q(7, 1)));
        assert_eq!(parse_rational("-7/2"), Some(q(-7, 2)));
        assert_eq!(parse_rational("3.25"), Some(q(13, 4)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn canonical_text_round_trips() {
        for s in ["0", "40", "-3", "7/2", "-1/3"] {
            let v = BigRational::parse_text(s).unwrap();
            assert_eq!(v.to_text(), s);
        }
    }

    #[test]
    fn decimal_display_trims() {
        assert_eq!(display_decimal(&q(10, 1)), "10");
        assert_eq!(display_decimal(&q(7, 2)), "3.5");
        assert_eq!(display_decimal(&q(1, 3)), "0.33");
    }
}
