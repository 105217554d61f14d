//! Weight vectors, point vectors, barycenters and the Jensen functional
//!
//! `J(f, x, w) = sum_i w_i f(x_i) - f(sum_i w_i x_i)`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::catalog::ConvexFn;
use crate::error::{Error, Result};
use crate::rational::{self, to_f64, Rational};

/// How functional values are compared.
///
/// `Exact` carries every functional as a rational when the function admits
/// exact evaluation and compares those with zero tolerance; it falls back to
/// `Float` for `exp` and `neg_log`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    #[default]
    Exact,
    Float,
}

/// Weights summing to exactly one.
///
/// Unsigned vectors are the only ones accepted by the bound checks; signed
/// vectors appear as internal states of the upper chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    entries: Vec<Rational>,
    signed: bool,
}

impl WeightVector {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|w| w.is_negative()) {
            return Err(Error::InvalidWeights(format!(
                "entry {i} is negative ({})",
                rational::format_ratio(&entries[i])
            )));
        }
        Self::build(entries, false)
    }

    pub fn signed(entries: Vec<Rational>) -> Result<Self> {
        Self::build(entries, true)
    }

    fn build(entries: Vec<Rational>, signed: bool) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidWeights("no entries".to_string()));
        }
        let total = rational::sum(&entries);
        if !total.is_one() {
            return Err(Error::InvalidWeights(format!(
                "entries sum to {}, not 1",
                rational::format_ratio(&total)
            )));
        }
        Ok(WeightVector { entries, signed })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("no entries".to_string()));
        }
        let w = Rational::new(BigInt::one(), BigInt::from(n));
        Ok(WeightVector { entries: alloc::vec![w; n], signed: false })
    }

    /// Normalizes nonnegative integer counts into weights.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u128 = counts.iter().map(|&c| c as u128).sum();
        if total == 0 {
            return Err(Error::InvalidWeights("counts sum to zero".to_string()));
        }
        let total = BigInt::from(total);
        let entries = counts
            .iter()
            .map(|&c| Rational::new(BigInt::from(c), total.clone()))
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(Signed::is_positive)
    }

    pub(crate) fn require_unsigned(&self, what: &str) -> Result<()> {
        if self.signed {
            return Err(Error::InvalidWeights(format!("{what} must not be a signed vector")));
        }
        Ok(())
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        match self.entries.iter().position(|w| !w.is_positive()) {
            Some(index) => Err(Error::ZeroDenominator { index }),
            None => Ok(()),
        }
    }
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        rational::as_ratio_vec::serialize(&self.entries, s)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let entries = rational::as_ratio_vec::deserialize(d)?;
        WeightVector::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Points of the interval a function lives on, kept as exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointVector {
    entries: Vec<Rational>,
}

impl PointVector {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("empty point vector".to_string()));
        }
        Ok(PointVector { entries })
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_domain(&self, f: &ConvexFn) -> Result<()> {
        match self.entries.iter().find(|x| !f.contains(x)) {
            Some(x) => Err(Error::domain(x, f.lower(), f.upper())),
            None => Ok(()),
        }
    }
}

impl Serialize for PointVector {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        rational::as_point_vec::serialize(&self.entries, s)
    }
}

impl<'de> Deserialize<'de> for PointVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let entries = rational::as_point_vec::deserialize(d)?;
        PointVector::new(entries).map_err(serde::de::Error::custom)
    }
}

/// A functional value in floating point, plus its exact rational value when
/// the function admits one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub approx: f64,
    #[serde(with = "rational::as_opt_ratio", default)]
    pub exact: Option<Rational>,
}

impl Value {
    pub fn zero() -> Self {
        Value { approx: 0.0, exact: Some(Rational::zero()) }
    }

    pub fn jensen(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<Self> {
        Ok(Value { approx: jensen_raw(f, x, w)?, exact: jensen_raw_exact(f, x, w)? })
    }

    /// `sum_i w_i f(x_i)`.
    pub fn weighted(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<Self> {
        Ok(Value {
            approx: weighted_values(f, x, w)?,
            exact: weighted_values_exact(f, x, w)?,
        })
    }

    pub fn rational(r: &Rational) -> Self {
        Value { approx: to_f64(r), exact: Some(r.clone()) }
    }

    pub fn at(f: &ConvexFn, x: &Rational) -> Result<Self> {
        Ok(Value { approx: f.eval_rational(x)?, exact: f.eval_exact(x)? })
    }

    pub fn scaled(&self, c: &Rational) -> Self {
        Value {
            approx: to_f64(c) * self.approx,
            exact: self.exact.as_ref().map(|e| c * e),
        }
    }

    pub fn plus(&self, other: &Value) -> Self {
        Value {
            approx: self.approx + other.approx,
            exact: self.exact.as_ref().zip(other.exact.as_ref()).map(|(a, b)| a + b),
        }
    }

    pub fn minus(&self, other: &Value) -> Self {
        Value {
            approx: self.approx - other.approx,
            exact: self.exact.as_ref().zip(other.exact.as_ref()).map(|(a, b)| a - b),
        }
    }

    /// `self >= other`, exactly when both sides are exact and `mode` is `Exact`,
    /// else within the absolute tolerance `tol`.
    pub fn at_least(&self, other: &Value, tol: f64, mode: Arithmetic) -> bool {
        match (mode, &self.exact, &other.exact) {
            (Arithmetic::Exact, Some(a), Some(b)) => a >= b,
            _ => self.approx >= other.approx - tol,
        }
    }

    /// `self == other`, exactly or within `tol` as in [`Value::at_least`].
    pub fn matches(&self, other: &Value, tol: f64, mode: Arithmetic) -> bool {
        match (mode, &self.exact, &other.exact) {
            (Arithmetic::Exact, Some(a), Some(b)) => a == b,
            _ => libm::fabs(self.approx - other.approx) <= tol,
        }
    }

    /// Whether [`Value::at_least`] would compare exactly.
    pub fn is_exact_with(&self, other: &Value, mode: Arithmetic) -> bool {
        mode == Arithmetic::Exact && self.exact.is_some() && other.exact.is_some()
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// `sum_i w_i x_i`, exactly.
pub fn barycenter(x: &PointVector, w: &WeightVector) -> Result<Rational> {
    check_len(x.len(), w.len())?;
    Ok(rational::dot(w.entries(), x.entries()))
}

/// `J(f, x, w)` in floating point.
pub fn jensen(f: &ConvexFn, x: &PointVector, w: &WeightVector) -> Result<f64> {
    check_len(x.len(), w.len())?;
    jensen_raw(f, x.entries(), w.entries())
}

/// `J(f, x, w)` as an exact rational, when `f` admits exact evaluation.
pub fn jensen_exact(f: &ConvexFn, x: &PointVector, w: &WeightVector) -> Result<Option<Rational>> {
    check_len(x.len(), w.len())?;
    jensen_raw_exact(f, x.entries(), w.entries())
}

pub(crate) fn weighted_values(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<f64> {
    x.iter().zip(w).try_fold(0.0, |acc, (xi, wi)| {
        Ok(acc + to_f64(wi) * f.eval_rational(xi)?)
    })
}

/// `sum_i |w_i f(x_i)|`, the magnitude float roundoff in [`weighted_values`] scales with.
pub(crate) fn weighted_magnitude(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<f64> {
    x.iter().zip(w).try_fold(0.0, |acc, (xi, wi)| {
        Ok(acc + libm::fabs(to_f64(wi) * f.eval_rational(xi)?))
    })
}

pub(crate) fn weighted_values_exact(
    f: &ConvexFn,
    x: &[Rational],
    w: &[Rational],
) -> Result<Option<Rational>> {
    let mut acc = Rational::zero();
    for (xi, wi) in x.iter().zip(w) {
        match f.eval_exact(xi)? {
            Some(v) => acc += wi * v,
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

/// Evaluated as `sum_i w_i (f(x_i) - f(center))`, which uses the exact unit sum
/// of the weights and gives exactly zero on constant points.
pub(crate) fn jensen_raw(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<f64> {
    let center = rational::dot(w, x);
    let at_center = f.eval_rational(&center)?;
    x.iter().zip(w).try_fold(0.0, |acc, (xi, wi)| {
        Ok(acc + to_f64(wi) * (f.eval_rational(xi)? - at_center))
    })
}

pub(crate) fn jensen_raw_exact(
    f: &ConvexFn,
    x: &[Rational],
    w: &[Rational],
) -> Result<Option<Rational>> {
    let center = rational::dot(w, x);
    let Some(at_center) = f.eval_exact(&center)? else {
        return Ok(None);
    };
    Ok(weighted_values_exact(f, x, w)?.map(|s| s - at_center))
}

/// Magnitude of the terms of `J(f, x, w)`; float error in [`jensen_raw`] is relative to this.
pub(crate) fn jensen_magnitude(f: &ConvexFn, x: &[Rational], w: &[Rational]) -> Result<f64> {
    let center = rational::dot(w, x);
    Ok(weighted_magnitude(f, x, w)? + libm::fabs(f.eval_rational(&center)?))
}
