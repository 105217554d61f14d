//! Fixed-length chains: every state keeps the length of `p_1`.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{finish, next_q, validate_start, ChainKind, ChainResult, ChainState, Mixture, QSource, Recorded};
use crate::baseline::extremes_raw;
use crate::catalog::ConvexFn;
use crate::error::{Error, Result};
use crate::jensen::{PointVector, WeightVector};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct LowerStep {
    /// `m = min_i p_i / q_i`.
    pub m: Rational,
    /// Indices attaining `m`; their count is the multiplicity `s`.
    pub ties: Vec<usize>,
    pub next: Mixture,
}

/// Entries off the minimum become `p_i - m q_i`; each of the `s` tied entries
/// gets weight `m / s` and moves to the `q`-barycenter.
pub fn lower_step(state: &Mixture, q: &WeightVector) -> Result<LowerStep> {
    state.require_len(q)?;
    state.require_nonnegative()?;
    let ext = extremes_raw(&state.weights, q.entries())?;
    let m = ext.m;
    let ties = ext.argmin;
    let center = rational::dot(q.entries(), &state.points);
    let share = &m / Rational::from_integer(BigInt::from(ties.len()));
    let mut next = state.clone();
    for (i, (w, qi)) in next.weights.iter_mut().zip(q.entries()).enumerate() {
        if ties.binary_search(&i).is_ok() {
            *w = share.clone();
            next.points[i] = center.clone();
        } else {
            *w -= &m * qi;
        }
    }
    Ok(LowerStep { m, ties, next })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperStep {
    /// `M = p_j / q_j` at the pivot.
    pub big_m: Rational,
    pub pivot: usize,
    pub next: Mixture,
}

/// With `pivot = None` the smallest index attaining the maximum ratio is used.
///
/// Off-pivot entries become `p_i - M q_i` (possibly negative); the pivot gets
/// weight `M` and moves to the `q`-barycenter.
pub fn upper_step(state: &Mixture, q: &WeightVector, pivot: Option<usize>) -> Result<UpperStep> {
    state.require_len(q)?;
    let ext = extremes_raw(&state.weights, q.entries())?;
    let pivot = match pivot {
        None => ext.argmax[0],
        Some(j) if j < state.len() => {
            if !ext.argmax.contains(&j) {
                return Err(Error::InvariantViolation(alloc::format!(
                    "pivot {j} no longer attains the maximum ratio"
                )));
            }
            j
        }
        Some(j) => return Err(Error::LengthMismatch { expected: state.len(), found: j + 1 }),
    };
    let big_m = ext.big_m;
    let center = rational::dot(q.entries(), &state.points);
    let mut next = state.clone();
    for (i, (w, qi)) in next.weights.iter_mut().zip(q.entries()).enumerate() {
        if i == pivot {
            *w = big_m.clone();
            next.points[i] = center.clone();
        } else {
            *w -= &big_m * qi;
        }
    }
    Ok(UpperStep { big_m, pivot, next })
}

/// Lower refinement chain over `N` steps with a-priori weights from `qs`.
pub fn lower_chain(
    f: &ConvexFn,
    x1: &PointVector,
    p1: &WeightVector,
    qs: &mut dyn QSource,
    n_steps: usize,
) -> Result<ChainResult> {
    let mut state = validate_start(f, x1, p1, n_steps)?;
    let mut trace = Vec::with_capacity(n_steps);
    let mut stalled = false;
    for k in 1..=n_steps {
        let q = next_q(qs, k, &state)?;
        let step = lower_step(&state, &q)?;
        stalled |= step.m.is_zero();
        trace.push(ChainState {
            k,
            n: state.len(),
            p: state.weights,
            x: state.points,
            q: q.into_entries(),
            extreme: step.m,
            s: Some(step.ties.len()),
            j: None,
        });
        state = step.next;
    }
    let rec = Recorded { trace, terminal: state, eliminated: Vec::new(), stalled, early_stop: false };
    finish(f, ChainKind::Lower, false, rec)
}

/// Upper refinement chain; the pivot chosen at step 1 is kept throughout.
pub fn upper_chain(
    f: &ConvexFn,
    x1: &PointVector,
    p1: &WeightVector,
    qs: &mut dyn QSource,
    n_steps: usize,
) -> Result<ChainResult> {
    let mut state = validate_start(f, x1, p1, n_steps)?;
    let mut trace = Vec::with_capacity(n_steps);
    let mut pivot = None;
    for k in 1..=n_steps {
        let q = next_q(qs, k, &state)?;
        let step = upper_step(&state, &q, pivot)?;
        pivot = Some(step.pivot);
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
        state = step.next;
    }
    let rec = Recorded { trace, terminal: state, eliminated: Vec::new(), stalled: false, early_stop: false };
    let result = finish(f, ChainKind::Upper, false, rec)?;
    check_closed_form(&result)?;
    Ok(result)
}

/// `M_k = p_{j1,1} / prod_{m=1..k} q_{j1,m}` for a pivot that keeps its position.
pub fn closed_form_mk(p1: &[Rational], qs: &[Vec<Rational>], j1: usize, k: usize) -> Result<Rational> {
    let head = p1
        .get(j1)
        .ok_or(Error::LengthMismatch { expected: p1.len(), found: j1 + 1 })?;
    if k == 0 || k > qs.len() {
        return Err(Error::Config(alloc::format!("step {k} outside 1..={}", qs.len())));
    }
    let mut denom = Rational::one();
    for q in &qs[..k] {
        let qj = q.get(j1).ok_or(Error::LengthMismatch { expected: q.len(), found: j1 + 1 })?;
        if !qj.is_positive() {
            return Err(Error::ZeroDenominator { index: j1 });
        }
        denom *= qj;
    }
    Ok(head / denom)
}

/// Closed form over a trace whose pivot may move between positions.
pub(crate) fn closed_form_along(trace: &[ChainState], k: usize) -> Option<Rational> {
    let first = trace.first()?;
    let head = first.p.get(first.j?)?.clone();
    let mut denom = Rational::one();
    for state in trace.get(..k)? {
        denom *= state.q.get(state.j?)?;
    }
    (!denom.is_zero()).then(|| head / denom)
}

pub(crate) fn check_closed_form(result: &ChainResult) -> Result<()> {
    for (idx, state) in result.trace.iter().enumerate() {
        let expected = closed_form_along(&result.trace, idx + 1);
        if expected.as_ref() != Some(&state.extreme) {
            return Err(Error::InvariantViolation(alloc::format!(
                "M_{} = {} differs from its closed form",
                state.k,
                rational::format_ratio(&state.extreme)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::FnKind;
    use crate::chain::{AutoUniform, ExplicitQs};
    use crate::rational::{int, ratio};
    use alloc::vec;

    fn square() -> ConvexFn {
        ConvexFn::new(FnKind::Square, int(-100), None).unwrap()
    }

    fn w(v: &[(i64, i64)]) -> WeightVector {
        WeightVector::new(v.iter().map(|&(a, b)| ratio(a, b)).collect()).unwrap()
    }

    fn rats(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    fn mix(p: &[(i64, i64)], x: &[(i64, i64)]) -> Mixture {
        Mixture { weights: rats(p), points: rats(x) }
    }

    fn example_b() -> (PointVector, WeightVector, WeightVector) {
        (
            PointVector::new(vec![int(0), int(1)]).unwrap(),
            w(&[(1, 2), (1, 2)]),
            w(&[(1, 4), (3, 4)]),
        )
    }

    #[test]
    fn lower_step_examples() {
        let q = w(&[(1, 4), (3, 4)]);
        let s1 = lower_step(&mix(&[(1, 2), (1, 2)], &[(0, 1), (1, 1)]), &q).unwrap();
        assert_eq!((s1.m.clone(), s1.ties.clone()), (ratio(2, 3), vec![1]));
        assert_eq!(s1.next, mix(&[(1, 3), (2, 3)], &[(0, 1), (3, 4)]));

        let s2 = lower_step(&s1.next, &q).unwrap();
        assert_eq!(s2.m, ratio(8, 9));
        assert_eq!(s2.next, mix(&[(1, 9), (8, 9)], &[(0, 1), (9, 16)]));

        let u = w(&[(1, 3), (1, 3), (1, 3)]);
        let full = lower_step(&mix(&[(1, 3), (1, 3), (1, 3)], &[(0, 1), (1, 1), (5, 1)]), &u).unwrap();
        assert_eq!(full.m, int(1));
        assert_eq!(full.ties, vec![0, 1, 2]);
        assert_eq!(full.next, mix(&[(1, 3), (1, 3), (1, 3)], &[(2, 1), (2, 1), (2, 1)]));
    }

    #[test]
    fn lower_step_errors() {
        let state = mix(&[(1, 2), (1, 2)], &[(0, 1), (1, 1)]);
        assert!(matches!(lower_step(&state, &w(&[(1, 1)])), Err(Error::LengthMismatch { .. })));
        assert_eq!(lower_step(&state, &w(&[(0, 1), (1, 1)])), Err(Error::ZeroDenominator { index: 0 }));
        let signed = mix(&[(2, 1), (-1, 1)], &[(0, 1), (1, 1)]);
        assert!(matches!(lower_step(&signed, &w(&[(1, 2), (1, 2)])), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn upper_step_examples() {
        let q = w(&[(1, 4), (3, 4)]);
        let s1 = upper_step(&mix(&[(1, 2), (1, 2)], &[(0, 1), (1, 1)]), &q, None).unwrap();
        assert_eq!((s1.big_m.clone(), s1.pivot), (int(2), 0));
        assert_eq!(s1.next, mix(&[(2, 1), (-1, 1)], &[(3, 4), (1, 1)]));

        let s2 = upper_step(&s1.next, &q, Some(s1.pivot)).unwrap();
        assert_eq!(s2.big_m, int(8));
        assert_eq!(s2.pivot, 0);

        let tie = upper_step(&mix(&[(1, 4), (3, 4)], &[(0, 1), (1, 1)]), &q, None).unwrap();
        assert_eq!((tie.big_m.clone(), tie.pivot), (int(1), 0));
        assert_eq!(tie.next, mix(&[(1, 1), (0, 1)], &[(3, 4), (1, 1)]));
    }

    #[test]
    fn upper_step_rejects_stale_pivot() {
        let q = w(&[(1, 4), (3, 4)]);
        let r = upper_step(&mix(&[(1, 2), (1, 2)], &[(0, 1), (1, 1)]), &q, Some(1));
        assert!(matches!(r, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn lower_chain_regressions() {
        let (x, p, q) = example_b();
        let qs = vec![q.clone()];
        let r1 = lower_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 1).unwrap();
        assert_eq!(r1.defect_exact, Some(ratio(1, 8)));
        assert!((r1.defect - 0.125).abs() < 1e-12);

        let qs = vec![q.clone(), q];
        let r2 = lower_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 2).unwrap();
        assert_eq!(r2.extremes, vec![ratio(2, 3), ratio(8, 9)]);
        assert_eq!(r2.defect_exact, Some(ratio(1, 32)));
        assert!((r2.defect - 1.0 / 32.0).abs() < 1e-12);
        assert_eq!(r2.terminal, mix(&[(1, 9), (8, 9)], &[(0, 1), (9, 16)]));
        assert!(!r2.stalled);
    }

    #[test]
    fn lower_chain_constant_points_and_equal_weights() {
        let f = square();
        let x = PointVector::new(vec![int(3), int(3)]).unwrap();
        let p = w(&[(1, 3), (2, 3)]);
        let r = lower_chain(&f, &x, &p, &mut AutoUniform, 4).unwrap();
        assert_eq!(r.defect_exact, Some(int(0)));
        assert_eq!(r.defect, 0.0);

        let u = w(&[(1, 2), (1, 2)]);
        let x = PointVector::new(vec![int(0), int(4)]).unwrap();
        let r = lower_chain(&f, &x, &u, &mut AutoUniform, 3).unwrap();
        assert!(r.extremes.iter().all(|m| *m == int(1)));
        assert_eq!(r.defect_exact, Some(int(0)));
    }

    #[test]
    fn lower_chain_flags_stall() {
        let x = PointVector::new(vec![int(0), int(1), int(2)]).unwrap();
        let p = w(&[(0, 1), (1, 2), (1, 2)]);
        let r = lower_chain(&square(), &x, &p, &mut AutoUniform, 3).unwrap();
        assert!(r.stalled);
        assert!(r.extremes.iter().all(Zero::is_zero));
        assert!(r.defect_exact.unwrap() >= int(0));
    }

    #[test]
    fn lower_chain_shape_errors() {
        let (x, p, _) = example_b();
        let qs = vec![w(&[(1, 3), (1, 3), (1, 3)])];
        assert_eq!(
            lower_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 1).unwrap_err(),
            Error::ShapeMismatch { step: 1, expected: 2, found: 3 }
        );
        assert!(matches!(
            lower_chain(&square(), &x, &p, &mut ExplicitQs::new(&[]), 1),
            Err(Error::Config(_))
        ));
        assert!(matches!(lower_chain(&square(), &x, &p, &mut AutoUniform, 0), Err(Error::Config(_))));
    }

    #[test]
    fn upper_chain_regressions() {
        let (x, p, q) = example_b();
        let qs = vec![q.clone()];
        let r1 = upper_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 1).unwrap();
        assert_eq!(r1.defect_exact, Some(ratio(-1, 8)));

        let qs = vec![q.clone(), q];
        let r2 = upper_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 2).unwrap();
        assert_eq!(r2.extremes, vec![int(2), int(8)]);
        // -1/8 - 8 J(square, (3/4, 1), (1/4, 3/4)) = -1/8 - 8 * 3/256
        assert_eq!(r2.defect_exact, Some(ratio(-7, 32)));
        assert_eq!(r2.initial_pivot(), Some(0));
    }

    #[test]
    fn upper_chain_degenerate() {
        let p = w(&[(1, 5), (4, 5)]);
        let x = PointVector::new(vec![int(-1), int(2)]).unwrap();
        let qs = vec![p.clone()];
        let r = upper_chain(&square(), &x, &p, &mut ExplicitQs::new(&qs), 1).unwrap();
        assert_eq!(r.defect_exact, Some(int(0)));

        let c = PointVector::new(vec![int(2), int(2)]).unwrap();
        let r = upper_chain(&square(), &c, &w(&[(1, 2), (1, 2)]), &mut AutoUniform, 5).unwrap();
        assert_eq!(r.defect_exact, Some(int(0)));
    }

    #[test]
    fn closed_form_examples() {
        let p1 = rats(&[(1, 2), (1, 2)]);
        let q = rats(&[(1, 4), (3, 4)]);
        let qs = vec![q.clone(), q];
        assert_eq!(closed_form_mk(&p1, &qs, 0, 1).unwrap(), int(2));
        assert_eq!(closed_form_mk(&p1, &qs, 0, 2).unwrap(), int(8));
        assert!(closed_form_mk(&p1, &qs, 0, 2).unwrap() > closed_form_mk(&p1, &qs, 0, 1).unwrap());
        assert!(closed_form_mk(&p1, &qs, 0, 3).is_err());
        assert!(closed_form_mk(&p1, &qs, 5, 1).is_err());
    }
}
