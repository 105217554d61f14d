//! Exact rationals and their text forms.
//!
//! Weights and extremes are written as `"num/den"`. Points are written as a
//! plain decimal when the value has a finite decimal expansion and fall back to
//! `"num/den"` otherwise, so a serialized trace always round-trips exactly.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Nearest `f64`; saturates to ±inf when the magnitude exceeds the `f64` range.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// The exact value of the shortest decimal that prints as `x`.
pub fn from_f64_shortest(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite number {x}")));
    }
    parse(&format!("{x}"))
}

/// Parses `"a/b"`, an integer, or a decimal with optional exponent.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_int(num.trim())?;
        let den = parse_int(den.trim())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(num, den));
    }
    parse_decimal(s)
}

fn parse_int(s: &str) -> Result<BigInt> {
    let digits = s.strip_prefix('+').unwrap_or(s);
    let ok = {
        let body = digits.strip_prefix('-').unwrap_or(digits);
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok {
        return Err(Error::Parse(format!("not an integer: {s:?}")));
    }
    digits
        .parse::<BigInt>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("not a number: {s:?}"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().map_err(|_| bad())?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, body) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    if exponent.unsigned_abs() > 4096 {
        return Err(Error::Parse(format!("exponent out of range in {s:?}")));
    }
    let mut digits = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    let mut value = Rational::from_integer(digits.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= Rational::from_integer(pow);
    } else {
        value /= Rational::from_integer(pow);
    }
    Ok(if negative { -value } else { value })
}

/// `"num/den"`, always with an explicit denominator.
pub fn format_ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Finite decimal when one exists, `"num/den"` otherwise.
pub fn format_point(r: &Rational) -> String {
    let den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut rest = den;
    let (mut e2, mut e5) = (0usize, 0usize);
    while rest.is_even() {
        rest /= &two;
        e2 += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        e5 += 1;
    }
    if !rest.is_one() {
        return format_ratio(r);
    }
    let places = e2.max(e5);
    let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let n = scaled.to_integer();
    if places == 0 {
        return n.to_string();
    }
    let sign = if n.is_negative() { "-" } else { "" };
    let mut digits = n.abs().to_string();
    if digits.len() <= places {
        let pad = places + 1 - digits.len();
        digits.insert_str(0, &"0".repeat(pad));
    }
    let split = digits.len() - places;
    format!("{sign}{}.{}", &digits[..split], &digits[split..])
}

pub fn sum<'a, I: IntoIterator<Item = &'a Rational>>(items: I) -> Rational {
    items.into_iter().fold(Rational::zero(), |acc, r| acc + r)
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (u, v)| acc + u * v)
}

struct RatioVisitor;

impl<'de> Visitor<'de> for RatioVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as \"num/den\", a decimal string, or a number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<Rational, E> {
        parse(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<Rational, E> {
        Ok(int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<Rational, E> {
        Ok(Rational::from_integer(BigInt::from(v)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<Rational, E> {
        from_f64_shortest(v).map_err(E::custom)
    }
}

struct RatioSeqVisitor;

impl<'de> Visitor<'de> for RatioSeqVisitor {
    type Value = Vec<Rational>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a list of rationals")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> core::result::Result<Self::Value, A::Error> {
        let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
        while let Some(v) = seq.next_element::<Wrapped>()? {
            out.push(v.0);
        }
        Ok(out)
    }
}

struct Wrapped(Rational);

impl<'de> serde::Deserialize<'de> for Wrapped {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        d.deserialize_any(RatioVisitor).map(Wrapped)
    }
}

struct WrappedSeq(Vec<Rational>);

impl<'de> serde::Deserialize<'de> for WrappedSeq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        d.deserialize_seq(RatioSeqVisitor).map(WrappedSeq)
    }
}

fn serialize_seq_with<S: Serializer>(
    v: &[Rational],
    s: S,
    fmt: fn(&Rational) -> String,
) -> core::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for r in v {
        seq.serialize_element(&fmt(r))?;
    }
    seq.end()
}

/// Serde adapter: one rational as `"num/den"`.
pub mod as_ratio {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<Rational, D::Error> {
        d.deserialize_any(RatioVisitor)
    }
}

/// Serde adapter: optional rational as `"num/den"` or `null`.
pub mod as_opt_ratio {
    use super::*;

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_str(&format_ratio(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<Option<Rational>, D::Error> {
        let v: Option<Wrapped> = serde::Deserialize::deserialize(d)?;
        Ok(v.map(|w| w.0))
    }
}

/// Serde adapter: a point, decimal when possible.
pub mod as_point {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_point(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<Rational, D::Error> {
        d.deserialize_any(RatioVisitor)
    }
}

/// Serde adapter: list of `"num/den"` strings.
pub mod as_ratio_vec {
    use super::*;

    pub fn serialize<S: Serializer>(
        v: &[Rational],
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serialize_seq_with(v, s, format_ratio)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<Vec<Rational>, D::Error> {
        d.deserialize_seq(RatioSeqVisitor)
    }
}

/// Serde adapter: list of points.
pub mod as_point_vec {
    use super::*;

    pub fn serialize<S: Serializer>(
        v: &[Rational],
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serialize_seq_with(v, s, format_point)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<Vec<Rational>, D::Error> {
        d.deserialize_seq(RatioSeqVisitor)
    }
}

/// Serde adapter: list of lists of `"num/den"` strings.
pub mod as_ratio_vec_vec {
    use super::*;

    pub fn serialize<S: Serializer>(
        v: &[Vec<Rational>],
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        struct Row<'a>(&'a [Rational]);
        impl serde::Serialize for Row<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
                serialize_seq_with(self.0, s, format_ratio)
            }
        }
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for row in v {
            seq.serialize_element(&Row(row))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<Vec<Vec<Rational>>, D::Error> {
        let rows: Vec<WrappedSeq> = serde::Deserialize::deserialize(d)?;
        Ok(rows.into_iter().map(|r| r.0).collect())
    }
}
