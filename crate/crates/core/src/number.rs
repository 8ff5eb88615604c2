//! Exact rationals with a floating-point fallback.
//!
//! Everything the library computes from rational input data stays in
//! [`Number::Exact`] until an irrational quantity (a Euclidean norm that is
//! not a perfect square) or a sampled estimate enters the computation, at
//! which point the value degrades to [`Number::Float`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational scalar used for coordinates, coefficients and multipliers.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3"`, `"-7/2"`, `"0.125"` or `"1e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Q> {
    let s = text.trim();
    let bad = || Error::Parse(format!("invalid rational literal `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{text}`")));
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let joined = format!("{int_part}{frac_part}");
    let mut value = Q::from_integer(joined.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = Q::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num::pow(ten, scale as usize);
    } else {
        value /= num::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// `p` for integers, `p/q` otherwise.
pub fn format_rational(value: &Q) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite float into a rational.
pub fn from_f64(value: f64) -> Option<Q> {
    Q::from_f64(value)
}

/// Exact square root when both numerator and denominator are perfect squares.
pub fn exact_sqrt(value: &Q) -> Option<Q> {
    if value.is_negative() {
        return None;
    }
    let n = value.numer().sqrt();
    let d = value.denom().sqrt();
    if &(&n * &n) == value.numer() && &(&d * &d) == value.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

/// Rounds a positive float to a dyadic rational with `bits` fractional bits,
/// falling back to the exact float value when rounding would hit zero.
pub fn dyadic(value: f64, bits: u32) -> Option<Q> {
    if !value.is_finite() {
        return None;
    }
    let scale = f64::from(2u32).powi(bits as i32);
    let scaled = (value * scale).round();
    if scaled == 0.0 {
        return from_f64(value);
    }
    let numer = BigInt::from_f64(scaled)?;
    Some(Q::new(numer, num::pow(BigInt::from(2), bits as usize)))
}

/// A scalar that is exact when it can be.
#[derive(Clone, Debug)]
pub enum Number {
    Exact(Q),
    Float(f64),
}

impl Number {
    pub fn zero() -> Self {
        Number::Exact(Q::zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(v) => to_f64(v),
            Number::Float(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Number::Exact(v) => Some(v),
            Number::Float(_) => None,
        }
    }

    /// Exact rational image of the value; floats convert bit-exactly.
    pub fn to_rational(&self) -> Option<Q> {
        match self {
            Number::Exact(v) => Some(v.clone()),
            Number::Float(v) => from_f64(*v),
        }
    }

    pub fn abs(&self) -> Number {
        match self {
            Number::Exact(v) => Number::Exact(v.abs()),
            Number::Float(v) => Number::Float(v.abs()),
        }
    }

    /// Sign with a tolerance applied to inexact values only.
    pub fn sign(&self, tol: f64) -> Ordering {
        match self {
            Number::Exact(v) => v.cmp(&Q::zero()),
            Number::Float(v) if *v > tol => Ordering::Greater,
            Number::Float(v) if *v < -tol => Ordering::Less,
            Number::Float(_) => Ordering::Equal,
        }
    }

    pub fn is_negative_tol(&self, tol: f64) -> bool {
        self.sign(tol) == Ordering::Less
    }

    pub fn min(self, other: Number) -> Number {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Number) -> Number {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Euclidean norm of a rational vector, exact when the squared norm is a
    /// rational square.
    pub fn sqrt_of(value: Q) -> Number {
        match exact_sqrt(&value) {
            Some(root) => Number::Exact(root),
            None => Number::Float(to_f64(&value).sqrt()),
        }
    }
}

impl From<Q> for Number {
    fn from(value: Q) -> Self {
        Number::Exact(value)
    }
}

impl From<f64> for Number {
    fn from(value: f64) -> Self {
        Number::Float(value)
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

macro_rules! number_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Number {
            type Output = Number;
            fn $method(self, rhs: Number) -> Number {
                match (self, rhs) {
                    (Number::Exact(a), Number::Exact(b)) => Number::Exact(a $op b),
                    (a, b) => Number::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
        impl<'a> $trait<&'a Number> for &'a Number {
            type Output = Number;
            fn $method(self, rhs: &'a Number) -> Number {
                match (self, rhs) {
                    (Number::Exact(a), Number::Exact(b)) => Number::Exact(a $op b),
                    (a, b) => Number::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
    };
}

number_binop!(Add, add, +);
number_binop!(Sub, sub, -);
number_binop!(Mul, mul, *);

impl Div for Number {
    type Output = Number;
    fn div(self, rhs: Number) -> Number {
        match (self, rhs) {
            (Number::Exact(a), Number::Exact(b)) if !b.is_zero() => Number::Exact(a / b),
            (a, b) => Number::Float(a.to_f64() / b.to_f64()),
        }
    }
}

impl Neg for Number {
    type Output = Number;
    fn neg(self) -> Number {
        match self {
            Number::Exact(v) => Number::Exact(-v),
            Number::Float(v) => Number::Float(-v),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(v) => f.write_str(&format_rational(v)),
            Number::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Exact values serialize as `"p/q"` strings, floats as JSON numbers.
impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Number::Exact(v) => serializer.serialize_str(&format_rational(v)),
            Number::Float(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct NumberVisitor;
        impl<'de> Visitor<'de> for NumberVisitor {
            type Value = Number;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational string or a number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Number, E> {
                parse_rational(v).map(Number::Exact).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Number, E> {
                Ok(Number::Exact(q(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Number, E> {
                Ok(Number::Exact(Q::from_integer(BigInt::from(v))))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Number, E> {
                Ok(Number::Float(v))
            }
        }
        deserializer.deserialize_any(NumberVisitor)
    }
}

/// Serde adapter for a single rational: written as `"p/q"`, read from a
/// string or a JSON integer.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Q, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Q, D::Error> {
        struct RationalVisitor;
        impl<'de> Visitor<'de> for RationalVisitor {
            type Value = Q;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational literal such as \"-7/2\" or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Q, E> {
                parse_rational(v).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Q, E> {
                Ok(q(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Q, E> {
                Ok(Q::from_integer(BigInt::from(v)))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Q, E> {
                // JSON floats are read through their shortest decimal form.
                parse_rational(&v.to_string()).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(RationalVisitor)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod serde_rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_rational")] Q);

    pub fn serialize<S: Serializer>(values: &[Q], serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&format_rational(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Vec<Q>, D::Error> {
        let wrapped: Vec<Wrapped> = Vec::deserialize(deserializer)?;
        Ok(wrapped.into_iter().map(|w| w.0).collect())
    }
}

/// Serde adapter for `Vec<Option<Q>>` (box bounds, `null` = unbounded).
pub mod serde_rational_opt_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    #[derive(Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_rational")] Q);

    pub fn serialize<S: Serializer>(values: &[Option<Q>], serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&v.as_ref().map(format_rational))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Vec<Option<Q>>, D::Error> {
        let wrapped: Vec<Option<Wrapped>> = Vec::deserialize(deserializer)?;
        Ok(wrapped.into_iter().map(|w| w.map(|w| w.0)).collect())
    }
}

/// Serde adapter for `Vec<Vec<Q>>`.
pub mod serde_rational_matrix {
    use super::*;
    use serde::ser::SerializeSeq;

    #[derive(Deserialize)]
    struct Row(#[serde(with = "super::serde_rational_vec")] Vec<Q>);

    pub fn serialize<S: Serializer>(rows: &[Vec<Q>], serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&r.iter().map(format_rational).collect::<Vec<_>>())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Vec<Vec<Q>>, D::Error> {
        let rows: Vec<Row> = Vec::deserialize(deserializer)?;
        Ok(rows.into_iter().map(|r| r.0).collect())
    }
}
