//! Recursive refinement chains.
//!
//! Each step consumes one weight vector `q_k`, subtracts `e_k J(f, x_k, q_k)`
//! from the running Jensen-type expression and rewrites `(p_k, x_k)` so that
//! the weight sum and the barycenter are preserved exactly. Lower chains use
//! `e_k = min_i p_ik / q_ik`, upper chains the ratio at a fixed pivot, which is
//! the maximum. After `N` steps the defect
//! `J(f, x_1, p_1) - sum_k e_k J(f, x_k, q_k)` is `>= 0` for lower chains and
//! `<= 0` for upper chains.
//!
//! The reducing variants drop the entries whose weight became zero instead of
//! keeping them, so the length `n_k` of the state can shrink.

mod reduce;
mod refine;

pub use reduce::{
    reduce_lower_chain, reduce_lower_step, reduce_upper_chain, reduce_upper_step, ReduceLowerStep,
    ReduceUpperStep,
};
pub(crate) use refine::closed_form_along;
pub use refine::{closed_form_mk, lower_chain, lower_step, upper_chain, upper_step, LowerStep, UpperStep};

use alloc::vec::Vec;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::baseline::FLOAT_TOL;
use crate::catalog::ConvexFn;
use crate::error::{Error, Result};
use crate::jensen::{check_len, jensen_magnitude, Arithmetic, PointVector, Value, WeightVector};
use crate::rational::{self, to_f64, Rational};

/// Weights paired with points: the `(p_k, x_k)` part of a chain state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mixture {
    #[serde(rename = "p", with = "rational::as_ratio_vec")]
    pub weights: Vec<Rational>,
    #[serde(rename = "x", with = "rational::as_point_vec")]
    pub points: Vec<Rational>,
}

impl Mixture {
    pub fn new(p: &WeightVector, x: &PointVector) -> Result<Self> {
        check_len(x.len(), p.len())?;
        Ok(Mixture { weights: p.entries().to_vec(), points: x.entries().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> Rational {
        rational::sum(&self.weights)
    }

    pub fn barycenter(&self) -> Rational {
        rational::dot(&self.weights, &self.points)
    }

    /// `sum_i p_i f(x_i)`.
    pub fn weighted_value(&self, f: &ConvexFn) -> Result<Value> {
        Value::weighted(f, &self.points, &self.weights)
    }

    /// `(weight, point)` pairs with nonzero weight, sorted.
    pub fn support(&self) -> Vec<(Rational, Rational)> {
        let mut pairs: Vec<(Rational, Rational)> = self
            .weights
            .iter()
            .zip(&self.points)
            .filter(|(w, _)| !w.is_zero())
            .map(|(w, x)| (w.clone(), x.clone()))
            .collect();
        pairs.sort();
        pairs
    }

    pub(crate) fn require_len(&self, q: &WeightVector) -> Result<()> {
        check_len(self.len(), q.len())
    }

    pub(crate) fn require_nonnegative(&self) -> Result<()> {
        match self.weights.iter().position(Signed::is_negative) {
            Some(i) => Err(Error::InvalidWeights(alloc::format!(
                "lower steps need nonnegative weights, entry {i} is {}",
                rational::format_ratio(&self.weights[i])
            ))),
            None => Ok(()),
        }
    }
}

/// Supplies the a-priori weight vector `q_k` of each step.
pub trait QSource {
    /// The vector for step `step` (1-based); `len` is the state length it must match.
    fn next_q(&mut self, step: usize, len: usize) -> Result<WeightVector>;
}

/// A fixed list of vectors, one per step. Lengths are checked, never adjusted.
#[derive(Debug, Clone)]
pub struct ExplicitQs<'a> {
    qs: &'a [WeightVector],
}

impl<'a> ExplicitQs<'a> {
    pub fn new(qs: &'a [WeightVector]) -> Self {
        ExplicitQs { qs }
    }
}

impl QSource for ExplicitQs<'_> {
    fn next_q(&mut self, step: usize, len: usize) -> Result<WeightVector> {
        let q = self.qs.get(step - 1).ok_or_else(|| {
            Error::Config(alloc::format!("no q supplied for step {step} ({} given)", self.qs.len()))
        })?;
        if q.len() != len {
            return Err(Error::ShapeMismatch { step, expected: len, found: q.len() });
        }
        Ok(q.clone())
    }
}

/// Uniform `q` of whatever length the step needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct AutoUniform;

impl QSource for AutoUniform {
    fn next_q(&mut self, _step: usize, len: usize) -> Result<WeightVector> {
        WeightVector::uniform(len)
    }
}

impl<F> QSource for F
where
    F: FnMut(usize, usize) -> Result<WeightVector>,
{
    fn next_q(&mut self, step: usize, len: usize) -> Result<WeightVector> {
        self(step, len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Lower,
    Upper,
}

/// One step of a trace: the state `(p_k, x_k)` entering step `k`, the `q_k`
/// it consumed and the extreme `e_k` it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub k: usize,
    #[serde(with = "rational::as_ratio_vec")]
    pub p: Vec<Rational>,
    #[serde(with = "rational::as_point_vec")]
    pub x: Vec<Rational>,
    #[serde(with = "rational::as_ratio_vec")]
    pub q: Vec<Rational>,
    #[serde(with = "rational::as_ratio")]
    pub extreme: Rational,
    /// Multiplicity of the minimum (lower chains).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Pivot position in this state (upper chains).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    pub n: usize,
}

impl ChainState {
    pub fn mixture(&self) -> Mixture {
        Mixture { weights: self.p.clone(), points: self.x.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub kind: ChainKind,
    #[serde(default)]
    pub reducing: bool,
    pub trace: Vec<ChainState>,
    /// State after the last step.
    pub terminal: Mixture,
    #[serde(with = "rational::as_ratio_vec")]
    pub extremes: Vec<Rational>,
    /// `J(f, x_k, q_k)` per step, in floating point.
    pub step_functionals: Vec<f64>,
    pub defect: f64,
    #[serde(default, with = "rational::as_opt_ratio", skip_serializing_if = "Option::is_none")]
    pub defect_exact: Option<Rational>,
    /// Magnitude the float defect is accurate relative to.
    pub scale: f64,
    /// Some `m_k` was zero; the chain made no progress from that step on.
    #[serde(default)]
    pub stalled: bool,
    /// A reducing lower chain collapsed to one point before `N` steps.
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_seq: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eliminated: Option<Vec<Vec<usize>>>,
}

impl ChainResult {
    pub fn tolerance(&self) -> f64 {
        FLOAT_TOL * self.scale
    }

    pub fn defect_value(&self) -> Value {
        Value { approx: self.defect, exact: self.defect_exact.clone() }
    }

    /// The sign claim: `defect >= 0` for lower chains, `<= 0` for upper chains.
    pub fn defect_ok(&self, mode: Arithmetic) -> bool {
        let d = self.defect_value();
        match self.kind {
            ChainKind::Lower => d.at_least(&Value::zero(), self.tolerance(), mode),
            ChainKind::Upper => Value::zero().at_least(&d, self.tolerance(), mode),
        }
    }

    pub fn max_multiplicity(&self) -> usize {
        self.trace.iter().filter_map(|s| s.s).max().unwrap_or(0)
    }

    /// The pivot `j_1` of an upper chain, as a position in the initial state.
    pub fn initial_pivot(&self) -> Option<usize> {
        self.trace.first().and_then(|s| s.j)
    }
}

/// `J(f, x_1, p_1) - sum_k e_k J(f, x_k, q_k)` over a trace, with its float scale.
pub fn trace_defect(f: &ConvexFn, trace: &[ChainState]) -> Result<(Value, f64, Vec<f64>)> {
    let Some(first) = trace.first() else {
        return Err(Error::Config(alloc::string::String::from("empty trace")));
    };
    let head = Value::jensen(f, &first.x, &first.p)?;
    let mut scale = 1.0 + jensen_magnitude(f, &first.x, &first.p)?;
    let mut defect = head;
    let mut functionals = Vec::with_capacity(trace.len());
    for state in trace {
        let j = Value::jensen(f, &state.x, &state.q)?;
        scale += libm::fabs(to_f64(&state.extreme)) * jensen_magnitude(f, &state.x, &state.q)?;
        functionals.push(j.approx);
        defect = defect.minus(&j.scaled(&state.extreme));
    }
    Ok((defect, scale, functionals))
}

pub(crate) struct Recorded {
    pub trace: Vec<ChainState>,
    pub terminal: Mixture,
    pub eliminated: Vec<Vec<usize>>,
    pub stalled: bool,
    pub early_stop: bool,
}

pub(crate) fn validate_start(
    f: &ConvexFn,
    x1: &PointVector,
    p1: &WeightVector,
    n_steps: usize,
) -> Result<Mixture> {
    p1.require_unsigned("p1")?;
    x1.check_domain(f)?;
    if n_steps == 0 {
        return Err(Error::Config(alloc::string::String::from("N must be at least 1")));
    }
    Mixture::new(p1, x1)
}

pub(crate) fn next_q(qs: &mut dyn QSource, step: usize, state: &Mixture) -> Result<WeightVector> {
    let q = qs.next_q(step, state.len())?;
    if q.len() != state.len() {
        return Err(Error::ShapeMismatch { step, expected: state.len(), found: q.len() });
    }
    q.require_unsigned("q")?;
    q.require_positive()?;
    Ok(q)
}

pub(crate) fn finish(
    f: &ConvexFn,
    kind: ChainKind,
    reducing: bool,
    rec: Recorded,
) -> Result<ChainResult> {
    let (defect, scale, step_functionals) = trace_defect(f, &rec.trace)?;
    let extremes = rec.trace.iter().map(|s| s.extreme.clone()).collect();
    let (n_seq, eliminated) = if reducing {
        (Some(rec.trace.iter().map(|s| s.n).collect()), Some(rec.eliminated))
    } else {
        (None, None)
    };
    Ok(ChainResult {
        kind,
        reducing,
        trace: rec.trace,
        terminal: rec.terminal,
        extremes,
        step_functionals,
        defect: defect.approx,
        defect_exact: defect.exact,
        scale,
        stalled: rec.stalled,
        early_stop: rec.early_stop,
        n_seq,
        eliminated,
    })
}
