//! Dimension-reducing chains.
//!
//! Entries whose updated weight would be exactly zero are removed. For the
//! lower chain the tied entries are replaced by a single barycenter entry
//! appended at the end, so `n_{k+1} = n_k - s_k + 1`. For the upper chain only
//! the first step can produce zeros (ties with the pivot), after which the
//! length stays at `n_2`. Survivors keep their relative order.

use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use super::refine::check_closed_form;
use super::{finish, next_q, validate_start, ChainKind, ChainResult, ChainState, Mixture, QSource, Recorded};
use crate::baseline::extremes_raw;
use crate::catalog::ConvexFn;
use crate::error::{Error, Result};
use crate::jensen::{PointVector, WeightVector};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceLowerStep {
    pub m: Rational,
    /// Positions removed from the state; `s = eliminated.len()`.
    pub eliminated: Vec<usize>,
    pub next: Mixture,
}

pub fn reduce_lower_step(state: &Mixture, q: &WeightVector) -> Result<ReduceLowerStep> {
    state.require_len(q)?;
    state.require_nonnegative()?;
    let ext = extremes_raw(&state.weights, q.entries())?;
    let m = ext.m;
    let center = rational::dot(q.entries(), &state.points);
    let mut next = Mixture {
        weights: Vec::with_capacity(state.len() - ext.argmin.len() + 1),
        points: Vec::with_capacity(state.len() - ext.argmin.len() + 1),
    };
    for (i, ((w, x), qi)) in state.weights.iter().zip(&state.points).zip(q.entries()).enumerate() {
        if ext.argmin.binary_search(&i).is_err() {
            next.weights.push(w - &m * qi);
            next.points.push(x.clone());
        }
    }
    next.weights.push(m.clone());
    next.points.push(center);
    Ok(ReduceLowerStep { m, eliminated: ext.argmin, next })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceUpperStep {
    pub big_m: Rational,
    /// Pivot position in the input state.
    pub pivot: usize,
    /// Pivot position in `next`.
    pub next_pivot: usize,
    /// Off-pivot positions whose weight became exactly zero.
    pub eliminated: Vec<usize>,
    pub next: Mixture,
}

/// Like [`super::upper_step`], dropping off-pivot entries with `p_i - M q_i = 0`.
pub fn reduce_upper_step(
    state: &Mixture,
    q: &WeightVector,
    pivot: Option<usize>,
) -> Result<ReduceUpperStep> {
    let step = super::upper_step(state, q, pivot)?;
    let mut next = Mixture { weights: Vec::new(), points: Vec::new() };
    let mut eliminated = Vec::new();
    let mut next_pivot = 0;
    for (i, (w, x)) in step.next.weights.into_iter().zip(step.next.points).enumerate() {
        if i != step.pivot && w.is_zero() {
            eliminated.push(i);
            continue;
        }
        if i == step.pivot {
            next_pivot = next.weights.len();
        }
        next.weights.push(w);
        next.points.push(x);
    }
    Ok(ReduceUpperStep { big_m: step.big_m, pivot: step.pivot, next_pivot, eliminated, next })
}

/// Reducing lower chain. Stops before step `k > 1` once the state is a single point.
pub fn reduce_lower_chain(
    f: &ConvexFn,
    x1: &PointVector,
    p1: &WeightVector,
    qs: &mut dyn QSource,
    n_steps: usize,
) -> Result<ChainResult> {
    let mut state = validate_start(f, x1, p1, n_steps)?;
    let mut trace = Vec::with_capacity(n_steps);
    let mut eliminated = Vec::with_capacity(n_steps);
    let (mut stalled, mut early_stop) = (false, false);
    for k in 1..=n_steps {
        if k > 1 && state.len() == 1 {
            early_stop = true;
            break;
        }
        let q = next_q(qs, k, &state)?;
        let step = reduce_lower_step(&state, &q)?;
        stalled |= step.m.is_zero();
        trace.push(ChainState {
            k,
            n: state.len(),
            p: state.weights,
            x: state.points,
            q: q.into_entries(),
            extreme: step.m,
            s: Some(step.eliminated.len()),
            j: None,
        });
        eliminated.push(step.eliminated);
        state = step.next;
    }
    let rec = Recorded { trace, terminal: state, eliminated, stalled, early_stop };
    finish(f, ChainKind::Lower, true, rec)
}

/// Reducing upper chain. Verifies length stabilization and the closed form of `M_k`.
pub fn reduce_upper_chain(
    f: &ConvexFn,
    x1: &PointVector,
    p1: &WeightVector,
    qs: &mut dyn QSource,
    n_steps: usize,
) -> Result<ChainResult> {
    let mut state = validate_start(f, x1, p1, n_steps)?;
    let mut trace = Vec::with_capacity(n_steps);
    let mut eliminated = Vec::with_capacity(n_steps);
    let mut pivot = None;
    for k in 1..=n_steps {
        let q = next_q(qs, k, &state)?;
        let step = reduce_upper_step(&state, &q, pivot)?;
        pivot = Some(step.next_pivot);
        trace.push(ChainState {
            k,
            n: state.len(),
            p: state.weights,
            x: state.points,
            q: q.into_entries(),
            extreme: step.big_m,
            s: None,
            j: Some(step.pivot),
        });
        eliminated.push(step.eliminated);
        state = step.next;
    }
    let rec = Recorded { trace, terminal: state, eliminated, stalled: false, early_stop: false };
    let result = finish(f, ChainKind::Upper, true, rec)?;
    check_stabilized(&result)?;
    check_closed_form(&result)?;
    Ok(result)
}

fn check_stabilized(result: &ChainResult) -> Result<()> {
    let lens = result.trace.iter().map(|s| s.n).chain(core::iter::once(result.terminal.len()));
    let after_first: Vec<usize> = lens.skip(1).collect();
    if after_first.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvariantViolation(alloc::format!(
            "state length did not stabilize after the first step: {after_first:?}"
        )));
    }
    for state in result.trace.iter().skip(1) {
        let pivot = state.j.unwrap_or(usize::MAX);
        let positives: Vec<usize> = (0..state.p.len()).filter(|&i| state.p[i].is_positive()).collect();
        if positives != [pivot] {
            return Err(Error::InvariantViolation(alloc::format!(
                "step {}: positive weights at {positives:?}, expected only the pivot {pivot}",
                state.k
            )));
        }
    }
    Ok(())
}
