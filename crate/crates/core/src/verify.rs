//! Independent checks over chain traces and cross-checks between chain variants.
//!
//! Nothing here trusts the bookkeeping a chain reports about itself: extremes,
//! multiplicities, lengths and the defect are recomputed from the stored states.
//! Evaluation errors do not abort verification; they become failing checks.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::baseline::{check_dragomir, extremes_raw, FLOAT_TOL};
use crate::catalog::ConvexFn;
use crate::chain::{
    closed_form_along, lower_chain, reduce_lower_chain, reduce_upper_chain, trace_defect, upper_chain, AutoUniform,
    ChainKind, ChainResult, ChainState, ExplicitQs, Mixture,
};
use crate::error::{Error, Result};
use crate::instance::Family;
use crate::jensen::{jensen_magnitude, weighted_magnitude, Arithmetic, PointVector, Value, WeightVector};
use crate::rational::{self, to_f64, Rational};

/// Relative tolerance of the per-step telescoping identity.
pub const TELESCOPING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub pass: bool,
    pub lhs: Value,
    pub rhs: Value,
    pub tolerance: f64,
    /// Compared as exact rationals (zero tolerance).
    pub exact: bool,
    /// How far the claim is from holding; `0` when it holds.
    pub violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

fn exact_gap(a: &Rational, b: &Rational) -> f64 {
    if a == b {
        0.0
    } else {
        finite(to_f64(&(a - b).abs())).max(f64::MIN_POSITIVE)
    }
}

fn unknown() -> Value {
    Value { approx: 0.0, exact: None }
}

impl Check {
    /// `lhs == rhs`.
    pub fn equal(name: &str, step: Option<usize>, lhs: Value, rhs: Value, tol: f64, mode: Arithmetic) -> Self {
        let exact = lhs.is_exact_with(&rhs, mode);
        let (pass, violation) = match (exact, &lhs.exact, &rhs.exact) {
            (true, Some(a), Some(b)) => (a == b, exact_gap(a, b)),
            _ => {
                let gap = libm::fabs(lhs.approx - rhs.approx);
                let pass = gap <= tol;
                (pass, if pass { 0.0 } else { finite(gap) })
            }
        };
        Check::build(name, step, pass, lhs, rhs, if exact { 0.0 } else { tol }, exact, violation)
    }

    /// `lhs >= rhs`.
    pub fn at_least(name: &str, step: Option<usize>, lhs: Value, rhs: Value, tol: f64, mode: Arithmetic) -> Self {
        let exact = lhs.is_exact_with(&rhs, mode);
        let (pass, violation) = match (exact, &lhs.exact, &rhs.exact) {
            (true, Some(a), Some(b)) => (a >= b, if a >= b { 0.0 } else { exact_gap(a, b) }),
            _ => {
                let pass = lhs.approx >= rhs.approx - tol;
                (pass, if pass { 0.0 } else { finite(rhs.approx - lhs.approx) })
            }
        };
        Check::build(name, step, pass, lhs, rhs, if exact { 0.0 } else { tol }, exact, violation)
    }

    /// Exact equality of two rationals.
    pub fn rational(name: &str, step: Option<usize>, lhs: &Rational, rhs: &Rational) -> Self {
        let violation = exact_gap(lhs, rhs);
        Check::build(name, step, lhs == rhs, Value::rational(lhs), Value::rational(rhs), 0.0, true, violation)
    }

    /// Equality of two counts (lengths, positions, multiplicities).
    pub fn count(name: &str, step: Option<usize>, found: usize, expected: usize) -> Self {
        let (a, b) = (rational::int(found as i64), rational::int(expected as i64));
        Check::rational(name, step, &a, &b)
    }

    /// A computation the check depends on failed.
    pub fn error(name: &str, step: Option<usize>, err: &Error) -> Self {
        let mut c = Check::build(name, step, false, unknown(), unknown(), 0.0, false, f64::MAX);
        c.detail = Some(err.to_string());
        c
    }

    pub fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        name: &str,
        step: Option<usize>,
        pass: bool,
        lhs: Value,
        rhs: Value,
        tolerance: f64,
        exact: bool,
        violation: f64,
    ) -> Self {
        Check { name: name.to_string(), step, pass, lhs, rhs, tolerance, exact, violation, detail: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub checks: Vec<Check>,
    /// Largest violation among failing checks, `0` when everything passes.
    pub worst_violation: f64,
    pub pass: bool,
}

impl VerifyReport {
    pub fn new(id: impl Into<String>, family: Option<Family>) -> Self {
        VerifyReport { id: id.into(), family, checks: Vec::new(), worst_violation: 0.0, pass: true }
    }

    pub fn push(&mut self, check: Check) {
        if !check.pass {
            self.pass = false;
            self.worst_violation = self.worst_violation.max(check.violation);
        }
        self.checks.push(check);
    }

    pub fn extend<I: IntoIterator<Item = Check>>(&mut self, checks: I) {
        for c in checks {
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The failing check with the largest violation.
    pub fn worst_check(&self) -> Option<&Check> {
        self.failures().fold(None, |best: Option<&Check>, c| match best {
            Some(b) if b.violation >= c.violation => Some(b),
            _ => Some(c),
        })
    }
}

fn guard(name: &str, step: Option<usize>, body: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    body().unwrap_or_else(|e| vec![Check::error(name, step, &e)])
}

/// State `k + 1` of a trace (1-based `k`), the terminal one after the last step.
fn successor(result: &ChainResult, idx: usize) -> Mixture {
    match result.trace.get(idx + 1) {
        Some(next) => next.mixture(),
        None => result.terminal.clone(),
    }
}

fn well_shaped(state: &ChainState) -> bool {
    state.x.len() == state.p.len() && state.q.len() == state.p.len() && !state.p.is_empty()
}

/// `sum p_k f(x_k) - e_k J(f, x_k, q_k) = sum p_{k+1} f(x_{k+1})` for every step.
pub fn telescoping_check(f: &ConvexFn, result: &ChainResult, mode: Arithmetic) -> Vec<Check> {
    let mut checks = Vec::with_capacity(result.trace.len());
    for (idx, state) in result.trace.iter().enumerate() {
        let step = Some(state.k);
        let next = successor(result, idx);
        checks.extend(guard("telescoping", step, || {
            let here = Value::weighted(f, &state.x, &state.p)?;
            let j = Value::jensen(f, &state.x, &state.q)?;
            let lhs = here.minus(&j.scaled(&state.extreme));
            let rhs = next.weighted_value(f)?;
            let scale = 1.0
                + weighted_magnitude(f, &state.x, &state.p)?
                + libm::fabs(to_f64(&state.extreme)) * jensen_magnitude(f, &state.x, &state.q)?
                + weighted_magnitude(f, &next.points, &next.weights)?;
            Ok(vec![Check::equal("telescoping", step, lhs, rhs, TELESCOPING_TOL * scale, mode)])
        }));
    }
    checks
}

/// Exact weight sum and barycenter on every state, plus the sign pattern of the weights.
pub fn conservation_check(result: &ChainResult) -> Vec<Check> {
    let mut checks = Vec::new();
    let Some(first) = result.trace.first() else {
        return checks;
    };
    let center = rational::dot(&first.p, &first.x);
    let one = Rational::one();
    let states = result
        .trace
        .iter()
        .map(|s| (s.k, s.mixture(), s.j))
        .chain(core::iter::once((result.trace.len() + 1, result.terminal.clone(), None)));
    for (k, mix, pivot) in states {
        let step = Some(k);
        checks.push(Check::rational("weight_sum", step, &mix.weight_sum(), &one));
        checks.push(Check::rational("barycenter", step, &mix.barycenter(), &center));
        match result.kind {
            ChainKind::Lower => {
                let negatives = mix.weights.iter().filter(|w| w.is_negative()).count();
                checks.push(Check::count("nonnegative", step, negatives, 0));
            }
            ChainKind::Upper if k >= 2 => {
                let positives: Vec<usize> = (0..mix.len()).filter(|&i| mix.weights[i].is_positive()).collect();
                let check = Check::count("single_positive_pivot", step, positives.len(), 1)
                    .with_detail(format!("positive at {positives:?}, pivot {pivot:?}"));
                let at_pivot = pivot.is_none_or(|j| positives == [j]);
                checks.push(Check { pass: check.pass && at_pivot, ..check });
                if pivot.is_none() {
                    if let (Some(&i), Some(last)) = (positives.first(), result.trace.last()) {
                        checks.push(Check::rational("terminal_pivot_weight", step, &mix.weights[i], &last.extreme));
                    }
                }
            }
            ChainKind::Upper => {}
        }
    }
    checks
}

/// Recomputed extremes, multiplicities, pivots, closed forms and state lengths.
pub fn structure_check(result: &ChainResult) -> Vec<Check> {
    let mut checks = Vec::new();
    let lens: Vec<usize> = result
        .trace
        .iter()
        .map(|s| s.p.len())
        .chain(core::iter::once(result.terminal.len()))
        .collect();
    for (idx, state) in result.trace.iter().enumerate() {
        let step = Some(state.k);
        checks.push(Check::count("step_index", step, state.k, idx + 1));
        checks.push(Check::count("n", step, state.n, state.p.len()));
        if !well_shaped(state) {
            checks.push(
                Check::count("shape", step, state.q.len(), state.p.len())
                    .with_detail(format!("p {}, x {}, q {}", state.p.len(), state.x.len(), state.q.len())),
            );
            checks.push(Check { pass: false, ..Check::count("shape", step, state.x.len(), state.p.len()) });
            continue;
        }
        checks.extend(guard("extreme", step, || extreme_checks(result, idx)));
        let next_len = lens[idx + 1];
        match (result.kind, result.reducing) {
            (_, false) => checks.push(Check::count("shape", step, next_len, state.p.len())),
            (ChainKind::Lower, true) => {
                let s = state.s.unwrap_or(0);
                let expected = (state.p.len() + 1).saturating_sub(s);
                checks.push(Check::count("n_reduction", step, next_len, expected));
            }
            (ChainKind::Upper, true) => {
                if idx >= 1 {
                    checks.push(Check::count("n_stabilization", Some(state.k + 1), next_len, lens[1]));
                }
            }
        }
    }
    if result.reducing && result.kind == ChainKind::Upper && lens.len() >= 2 {
        if let Some(first) = result.trace.first() {
            let dropped = result
                .eliminated
                .as_ref()
                .and_then(|e| e.first())
                .map_or(0, Vec::len);
            checks.push(Check::count("n_stabilization", Some(2), lens[1], first.p.len().saturating_sub(dropped)));
        }
    }
    checks
}

fn extreme_checks(result: &ChainResult, idx: usize) -> Result<Vec<Check>> {
    let state = &result.trace[idx];
    let step = Some(state.k);
    let ext = extremes_raw(&state.p, &state.q)?;
    let mut checks = Vec::new();
    match result.kind {
        ChainKind::Lower => {
            checks.push(Check::rational("extreme", step, &state.extreme, &ext.m));
            checks.push(Check::count("multiplicity", step, state.s.unwrap_or(0), ext.argmin.len()));
        }
        ChainKind::Upper => {
            let j = state.j.ok_or_else(|| Error::Parse(format!("step {} has no pivot", state.k)))?;
            let (Some(pj), Some(qj)) = (state.p.get(j), state.q.get(j)) else {
                return Err(Error::LengthMismatch { expected: state.p.len(), found: j + 1 });
            };
            checks.push(Check::rational("extreme", step, &state.extreme, &ext.big_m));
            checks.push(Check::rational("pivot_ratio", step, &(pj / qj), &ext.big_m));
            if idx == 0 {
                checks.push(Check::count("pivot", step, j, ext.argmax[0]));
            }
            match closed_form_along(&result.trace, idx + 1) {
                Some(m) => checks.push(Check::rational("closed_form_mk", step, &state.extreme, &m)),
                None => checks.push(Check::error(
                    "closed_form_mk",
                    step,
                    &Error::InvariantViolation("closed form undefined".to_string()),
                )),
            }
        }
    }
    Ok(checks)
}

/// The terminal Jensen step: `sum p_{N+1} f(x_{N+1})` against `f(sum p_1 x_1)`,
/// `>=` for lower chains and `<=` for upper chains.
pub fn final_jensen_check(f: &ConvexFn, result: &ChainResult, mode: Arithmetic) -> Vec<Check> {
    let Some(first) = result.trace.first() else {
        return Vec::new();
    };
    guard("final_jensen", None, || {
        let term = &result.terminal;
        let total = term.weighted_value(f)?;
        let center = rational::dot(&first.p, &first.x);
        let at_center = Value::at(f, &center)?;
        let tol = FLOAT_TOL * (1.0 + weighted_magnitude(f, &term.points, &term.weights)? + libm::fabs(at_center.approx));
        Ok(vec![match result.kind {
            ChainKind::Lower => Check::at_least("final_jensen", None, total, at_center, tol, mode),
            ChainKind::Upper => Check::at_least("final_jensen", None, at_center, total, tol, mode),
        }])
    })
}

/// Recomputes the defect from the trace and checks the sign claim on it.
pub fn defect_check(f: &ConvexFn, result: &ChainResult, mode: Arithmetic) -> Vec<Check> {
    guard("defect", None, || {
        let (defect, scale, functionals) = trace_defect(f, &result.trace)?;
        let mut checks = Vec::new();
        checks.push(Check::equal(
            "defect_recompute",
            None,
            result.defect_value(),
            defect.clone(),
            TELESCOPING_TOL * scale,
            mode,
        ));
        for (state, (&stored, &fresh)) in result.trace.iter().zip(result.step_functionals.iter().zip(&functionals)) {
            let v = |a: f64| Value { approx: a, exact: None };
            checks.push(Check::equal("step_functional", Some(state.k), v(stored), v(fresh), TELESCOPING_TOL * scale, mode));
        }
        checks.push(Check::count("step_functional_count", None, result.step_functionals.len(), functionals.len()));
        let first = &result.trace[0];
        let center = rational::dot(&first.p, &first.x);
        let telescoped = result.terminal.weighted_value(f)?.minus(&Value::at(f, &center)?);
        checks.push(Check::equal("defect_identity", None, defect.clone(), telescoped, FLOAT_TOL * scale, mode));
        let tol = FLOAT_TOL * scale;
        checks.push(match result.kind {
            ChainKind::Lower => Check::at_least("defect_sign", None, defect, Value::zero(), tol, mode),
            ChainKind::Upper => Check::at_least("defect_sign", None, Value::zero(), defect, tol, mode),
        });
        Ok(checks)
    })
}

/// Every chain-level check on one result.
pub fn chain_checks(f: &ConvexFn, result: &ChainResult, mode: Arithmetic) -> Vec<Check> {
    if result.trace.is_empty() {
        return vec![Check::error("trace", None, &Error::Config("empty trace".to_string()))];
    }
    let mut checks = structure_check(result);
    let shaped = result.trace.iter().all(well_shaped);
    checks.extend(conservation_check(result));
    if shaped {
        checks.extend(telescoping_check(f, result, mode));
        checks.extend(final_jensen_check(f, result, mode));
        checks.extend(defect_check(f, result, mode));
    }
    checks
}

pub fn verify_chain(id: &str, family: Option<Family>, f: &ConvexFn, result: &ChainResult, mode: Arithmetic) -> VerifyReport {
    let mut report = VerifyReport::new(id, family);
    report.extend(chain_checks(f, result, mode));
    report
}

/// One-step chains against the Dragomir residuals: the lower defect is
/// `J_p - m J_q`, the upper one `-(M J_q - J_p)`, with identical extremes.
pub fn dragomir_consistency(
    f: &ConvexFn,
    x: &PointVector,
    p: &WeightVector,
    q: &WeightVector,
    mode: Arithmetic,
) -> Vec<Check> {
    guard("dragomir_consistency", Some(1), || {
        let report = check_dragomir(f, x, p, q)?;
        let qs = [q.clone()];
        let lower = lower_chain(f, x, p, &mut ExplicitQs::new(&qs), 1)?;
        let upper = upper_chain(f, x, p, &mut ExplicitQs::new(&qs), 1)?;
        let tol = TELESCOPING_TOL * lower.scale.max(upper.scale);
        Ok(vec![
            Check::rational("dragomir_m", Some(1), &lower.extremes[0], &report.m),
            Check::rational("dragomir_M", Some(1), &upper.extremes[0], &report.big_m),
            Check::equal("dragomir_lower_residual", Some(1), lower.defect_value(), report.lower_residual, tol, mode),
            Check::equal(
                "dragomir_upper_residual",
                Some(1),
                upper.defect_value(),
                Value::zero().minus(&report.upper_residual),
                tol,
                mode,
            ),
        ])
    })
}

fn same_state(a: &ChainState, b: &ChainState) -> bool {
    a.p == b.p && a.x == b.x && a.q == b.q && a.extreme == b.extreme && a.j == b.j && a.n == b.n
}

/// With a unique maximizing index at the first step nothing is ever eliminated,
/// so the reducing and fixed-length upper chains produce identical traces.
/// Returns no checks when the maximum is tied.
pub fn remark1_consistency(
    f: &ConvexFn,
    x: &PointVector,
    p: &WeightVector,
    qs: &[WeightVector],
    n_steps: usize,
) -> Vec<Check> {
    let Some(q1) = qs.first() else {
        return Vec::new();
    };
    match extremes_raw(p.entries(), q1.entries()) {
        Ok(ext) if ext.argmax.len() == 1 => {}
        _ => return Vec::new(),
    }
    guard("remark1_trace", None, || {
        let plain = upper_chain(f, x, p, &mut ExplicitQs::new(qs), n_steps)?;
        let reduced = reduce_upper_chain(f, x, p, &mut ExplicitQs::new(qs), n_steps)?;
        let mut checks = vec![Check::count("remark1_length", None, reduced.trace.len(), plain.trace.len())];
        for (a, b) in plain.trace.iter().zip(&reduced.trace) {
            let c = Check::rational("remark1_trace", Some(a.k), &a.extreme, &b.extreme);
            checks.push(Check { pass: c.pass && same_state(a, b), ..c });
        }
        let c = Check::count("remark1_terminal", None, reduced.terminal.len(), plain.terminal.len());
        checks.push(Check { pass: c.pass && plain.terminal == reduced.terminal, ..c });
        Ok(checks)
    })
}

/// Under uniform `q`, when every lower step has a unique minimizer the reducing
/// and fixed-length lower chains carry the same nonzero `(weight, point)` pairs.
/// Returns no checks when some step has a tie.
pub fn s1_consistency(
    f: &ConvexFn,
    x: &PointVector,
    p: &WeightVector,
    n_steps: usize,
    mode: Arithmetic,
) -> Vec<Check> {
    let plain = match lower_chain(f, x, p, &mut AutoUniform, n_steps) {
        Ok(r) => r,
        Err(e) => return vec![Check::error("s1_support", None, &e)],
    };
    if plain.max_multiplicity() != 1 {
        return Vec::new();
    }
    guard("s1_support", None, || {
        let reduced = reduce_lower_chain(f, x, p, &mut AutoUniform, n_steps)?;
        let mut checks = Vec::new();
        for (a, b) in plain.trace.iter().zip(&reduced.trace) {
            let c = Check::rational("s1_extreme", Some(a.k), &a.extreme, &b.extreme);
            checks.push(c);
            let (sa, sb) = (a.mixture().support(), b.mixture().support());
            let c = Check::count("s1_support", Some(a.k), sb.len(), sa.len());
            checks.push(Check { pass: c.pass && sa == sb, ..c });
        }
        let (sa, sb) = (plain.terminal.support(), reduced.terminal.support());
        let c = Check::count("s1_terminal_support", None, sb.len(), sa.len());
        checks.push(Check { pass: c.pass && sa == sb, ..c });
        let tol = TELESCOPING_TOL * plain.scale.max(reduced.scale);
        checks.push(Check::equal("s1_defect", None, reduced.defect_value(), plain.defect_value(), tol, mode));
        Ok(checks)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::FnKind;
    use crate::chain::{lower_chain, upper_chain};
    use crate::rational::{int, ratio};

    fn square() -> ConvexFn {
        ConvexFn::new(FnKind::Square, int(-100), None).unwrap()
    }

    fn w(v: &[(i64, i64)]) -> WeightVector {
        WeightVector::new(v.iter().map(|&(a, b)| ratio(a, b)).collect()).unwrap()
    }

    fn pts(v: &[i64]) -> PointVector {
        PointVector::new(v.iter().map(|&a| int(a)).collect()).unwrap()
    }

    fn two_point_lower(n: usize) -> ChainResult {
        lower_chain(&square(), &pts(&[0, 1]), &w(&[(1, 2), (1, 2)]), &mut AutoUniform, n).unwrap()
    }

    fn worked_lower() -> ChainResult {
        let qs = [w(&[(1, 4), (3, 4)]), w(&[(1, 4), (3, 4)])];
        lower_chain(&square(), &pts(&[0, 1]), &w(&[(1, 2), (1, 2)]), &mut ExplicitQs::new(&qs), 2).unwrap()
    }

    fn worked_upper() -> ChainResult {
        let qs = [w(&[(1, 4), (3, 4)]), w(&[(1, 4), (3, 4)])];
        upper_chain(&square(), &pts(&[0, 1]), &w(&[(1, 2), (1, 2)]), &mut ExplicitQs::new(&qs), 2).unwrap()
    }

    #[test]
    fn telescoping_worked_values() {
        let r = worked_lower();
        let checks = telescoping_check(&square(), &r, Arithmetic::Exact);
        assert!(checks.iter().all(|c| c.pass && c.exact));
        assert_eq!(checks[0].lhs.exact, Some(ratio(3, 8)));
        assert_eq!(checks[0].rhs.exact, Some(ratio(3, 8)));

        let r = worked_upper();
        let checks = telescoping_check(&square(), &r, Arithmetic::Exact);
        assert!(checks.iter().all(|c| c.pass));
        assert_eq!(checks[0].lhs.exact, Some(ratio(1, 8)));
        assert_eq!(checks[0].rhs.exact, Some(ratio(1, 8)));
    }

    #[test]
    fn conservation_worked_values() {
        let r = worked_upper();
        let checks = conservation_check(&r);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert_eq!(r.trace[1].p, vec![int(2), int(-1)]);
        let sums: Vec<_> = checks.iter().filter(|c| c.name == "barycenter").map(|c| c.lhs.exact.clone()).collect();
        assert!(sums.iter().all(|s| *s == Some(ratio(1, 2))));
    }

    #[test]
    fn final_jensen_margin() {
        let r = worked_lower();
        let c = &final_jensen_check(&square(), &r, Arithmetic::Exact)[0];
        assert!(c.pass);
        assert_eq!(c.rhs.exact, Some(ratio(1, 4)));
        assert_eq!(c.lhs.exact.clone().unwrap() - c.rhs.exact.clone().unwrap(), ratio(1, 32));
    }

    #[test]
    fn clean_traces_pass_everything() {
        for r in [worked_lower(), worked_upper(), two_point_lower(3)] {
            let report = verify_chain("t", None, &square(), &r, Arithmetic::Exact);
            assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
            assert_eq!(report.worst_violation, 0.0);
        }
    }

    #[test]
    fn corrupted_weight_sum_is_named() {
        let mut r = worked_lower();
        r.trace[1].p[0] += ratio(1, 100);
        let report = verify_chain("bad", None, &square(), &r, Arithmetic::Exact);
        assert!(!report.pass);
        assert!(report.failures().any(|c| c.name == "weight_sum" && c.step == Some(2)));
        let c = report.failures().find(|c| c.name == "weight_sum").unwrap();
        assert_eq!(c.lhs.exact, Some(ratio(101, 100)));
        assert_eq!(c.rhs.exact, Some(int(1)));
        assert!(report.worst_violation > 0.0);
    }

    #[test]
    fn corrupted_extreme_breaks_closed_form() {
        let mut r = worked_upper();
        r.trace[1].extreme = int(7);
        let report = verify_chain("bad", None, &square(), &r, Arithmetic::Exact);
        assert!(report.failures().any(|c| c.name == "closed_form_mk"));
        assert!(report.failures().any(|c| c.name == "telescoping"));
    }

    #[test]
    fn malformed_shapes_do_not_panic() {
        let mut r = worked_lower();
        r.trace[0].q.pop();
        let report = verify_chain("bad", None, &square(), &r, Arithmetic::Exact);
        assert!(report.failures().any(|c| c.name == "shape"));

        let mut r = worked_upper();
        r.trace[1].j = Some(9);
        let report = verify_chain("bad", None, &square(), &r, Arithmetic::Exact);
        assert!(!report.pass);
    }

    #[test]
    fn cross_checks_on_small_instances() {
        let f = square();
        let x = pts(&[0, 1, 3]);
        let p = w(&[(1, 5), (1, 2), (3, 10)]);
        let q = w(&[(1, 3), (1, 3), (1, 3)]);
        let checks = dragomir_consistency(&f, &x, &p, &q, Arithmetic::Exact);
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.pass && c.exact), "{checks:?}");

        let qs = [q.clone(), w(&[(1, 6), (1, 2), (1, 3)]), q.clone()];
        let checks = remark1_consistency(&f, &x, &p, &qs, 3);
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");

        let tied = w(&[(1, 2), (1, 2), (0, 1)]);
        assert!(remark1_consistency(&f, &x, &tied, &qs, 3).is_empty());

        let checks = s1_consistency(&f, &x, &p, 4, Arithmetic::Exact);
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn report_serializes_failing_sides() {
        let mut r = worked_lower();
        r.terminal.weights[0] = int(0);
        let report = verify_chain("bad", None, &square(), &r, Arithmetic::Exact);
        let json = serde_json::to_string(&report).unwrap();
        let back: VerifyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        for c in report.failures() {
            assert!(c.lhs.exact.is_some() || c.detail.is_some());
        }
    }
}
