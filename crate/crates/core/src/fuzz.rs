//! Seeded random instances and aggregation of their verification reports.
//!
//! Every trial draws one base problem `(f, x, p, q_1, ...)` from its own
//! ChaCha stream and packages it once per family. Weights are integer
//! compositions over a random denominator, so they are exact and tie often;
//! about half the trials force ties in the minimum or maximum ratio, zero
//! weights (stalled lower chains) or `p = q`.
//!
//! Generation and evaluation are independent per instance; [`aggregate`]
//! sorts by id so the report does not depend on evaluation order.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::ops::RangeInclusive;

use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ConvexFn, FnKind};
use crate::chain::{reduce_lower_step, reduce_upper_step, Mixture};
use crate::error::{Error, Result};
use crate::instance::{verify_record, Family, Instance, Outcome, QSeq, RunRecord};
use crate::jensen::{Arithmetic, PointVector, WeightVector};
use crate::rational::{int, ratio, Rational};
use crate::verify::{Check, VerifyReport};

pub const MAX_N: usize = 32;
pub const MAX_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    pub trials: usize,
    pub n_range: RangeInclusive<usize>,
    #[serde(rename = "N_range")]
    pub steps_range: RangeInclusive<usize>,
    pub catalog: Vec<FnKind>,
    pub families: Vec<Family>,
    pub denominator_max: u64,
    pub mode: Arithmetic,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            trials: 100,
            n_range: 1..=8,
            steps_range: 1..=6,
            catalog: FnKind::ALL.to_vec(),
            families: Family::ALL.to_vec(),
            denominator_max: 10_000,
            mode: Arithmetic::Exact,
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".to_string());
        }
        let (n_lo, n_hi) = (*self.n_range.start(), *self.n_range.end());
        if n_lo > n_hi || n_lo < 1 || n_hi > MAX_N {
            return bad(format!("n range {n_lo}..={n_hi} must be a nonempty subset of 1..={MAX_N}"));
        }
        let (s_lo, s_hi) = (*self.steps_range.start(), *self.steps_range.end());
        if s_lo > s_hi || s_lo < 1 || s_hi > MAX_STEPS {
            return bad(format!("N range {s_lo}..={s_hi} must be a nonempty subset of 1..={MAX_STEPS}"));
        }
        if self.catalog.is_empty() {
            return bad("catalog is empty".to_string());
        }
        if self.families.is_empty() {
            return bad("no families selected".to_string());
        }
        if self.denominator_max < 2 * n_hi as u64 {
            return bad(format!("denominator_max must be at least 2 * n_max = {}", 2 * n_hi));
        }
        Ok(())
    }
}

/// The function of each kind the fuzzer uses, with the window points are drawn from
/// (in hundredths).
pub fn standard_function(kind: FnKind) -> (ConvexFn, RangeInclusive<i64>) {
    let f = match kind {
        FnKind::NegLog => ConvexFn::new(kind, ratio(1, 100), None),
        FnKind::PiecewiseLinear => ConvexFn::piecewise_linear(
            int(-10),
            None,
            vec![(int(-1), int(1)), (int(0), int(0)), (int(1), int(1)), (int(2), int(3))],
        ),
        _ => ConvexFn::new(kind, int(-10), None),
    };
    let window = match kind {
        FnKind::Square | FnKind::Abs => -500..=500,
        FnKind::Exp | FnKind::PiecewiseLinear => -300..=300,
        FnKind::FourthPower => -200..=200,
        FnKind::NegLog => 5..=1000,
    };
    (f.expect("catalog defaults are valid"), window)
}

/// `n` positive integers summing to a random total in `[n, max_total]`.
fn composition(rng: &mut ChaCha8Rng, n: usize, max_total: u64) -> Vec<u64> {
    let total = rng.gen_range(n as u64..=max_total.max(n as u64));
    let spare = total - n as u64;
    let mut cuts: Vec<u64> = (0..n - 1).map(|_| rng.gen_range(0..=spare)).collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain(core::iter::once(spare)) {
        parts.push(c - prev + 1);
        prev = c;
    }
    parts
}

fn normalize(counts: &[u64]) -> WeightVector {
    WeightVector::from_counts(counts).expect("counts have a positive sum")
}

fn random_q(rng: &mut ChaCha8Rng, n: usize, dmax: u64) -> WeightVector {
    normalize(&composition(rng, n, dmax))
}

/// A random subset of `0..n` with at least two elements (`n >= 2`).
fn tie_set(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    let size = rng.gen_range(2..=n);
    let mut chosen = vec![false; n];
    let mut left = size;
    while left > 0 {
        let i = rng.gen_range(0..n);
        if !chosen[i] {
            chosen[i] = true;
            left -= 1;
        }
    }
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pattern {
    Generic,
    MinTie,
    MaxTie,
    Zeros,
    Equal,
}

/// `(p, q_1)` in counts, following the tie pattern.
fn draw_weights(rng: &mut ChaCha8Rng, n: usize, dmax: u64, pattern: Pattern) -> (Vec<u64>, Vec<u64>) {
    let cap = (dmax / (2 * n as u64)).max(1);
    match pattern {
        Pattern::Generic => (composition(rng, n, dmax), composition(rng, n, dmax)),
        Pattern::Equal => {
            let q = composition(rng, n, dmax);
            (q.clone(), q)
        }
        Pattern::MinTie | Pattern::MaxTie => {
            let tied = tie_set(rng, n);
            let q: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=cap)).collect();
            let p = q
                .iter()
                .zip(&tied)
                .map(|(&b, &t)| match (pattern, t) {
                    (Pattern::MinTie, true) => b,
                    (Pattern::MinTie, false) => b + rng.gen_range(1..=cap),
                    (_, true) => 2 * b,
                    (_, false) => rng.gen_range(1..=2 * b - 1),
                })
                .collect();
            (p, q)
        }
        Pattern::Zeros => {
            let q = composition(rng, n, dmax);
            let mut p: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=2 * cap)).collect();
            let zero = rng.gen_range(0..n);
            p[zero] = 0;
            if p.iter().all(|&c| c == 0) {
                p[(zero + 1) % n] = 1;
            }
            (p, q)
        }
    }
}

fn draw_pattern(rng: &mut ChaCha8Rng, n: usize) -> Pattern {
    if n == 1 {
        return Pattern::Generic;
    }
    match rng.gen_range(0..20) {
        0..=6 => Pattern::MinTie,
        7..=9 => Pattern::MaxTie,
        10..=11 => Pattern::Zeros,
        12 => Pattern::Equal,
        _ => Pattern::Generic,
    }
}

fn draw_points(rng: &mut ChaCha8Rng, n: usize, window: &RangeInclusive<i64>) -> PointVector {
    let constant = rng.gen_range(0..25) == 0;
    let first = rng.gen_range(window.clone());
    let pts = (0..n)
        .map(|i| if constant || i == 0 { first } else { rng.gen_range(window.clone()) })
        .map(|k| ratio(k, 100))
        .collect();
    PointVector::new(pts).expect("n >= 1")
}

/// Per-step q vectors for a reducing chain, drawn to match the lengths the
/// chain will have. `constant` reuses `q_1` while the length allows it and
/// falls back to uniform weights otherwise.
fn reducing_qs(
    rng: &mut ChaCha8Rng,
    family: Family,
    start: &Mixture,
    q1: &WeightVector,
    steps: usize,
    constant: bool,
    dmax: u64,
) -> Result<Vec<WeightVector>> {
    let mut state = start.clone();
    let mut pivot = None;
    let mut qs = Vec::with_capacity(steps);
    for k in 1..=steps {
        if family == Family::Reduce8 && k > 1 && state.len() == 1 {
            break;
        }
        let q = if k == 1 || (constant && state.len() == q1.len()) {
            q1.clone()
        } else if constant {
            WeightVector::uniform(state.len())?
        } else {
            random_q(rng, state.len(), dmax)
        };
        state = if family == Family::Reduce8 {
            reduce_lower_step(&state, &q)?.next
        } else {
            let step = reduce_upper_step(&state, &q, pivot)?;
            pivot = Some(step.next_pivot);
            step.next
        };
        qs.push(q);
    }
    Ok(qs)
}

pub fn instance_id(trial: usize, family: Family) -> String {
    format!("t{trial:06}-{family}")
}

/// The instances of one trial, one per configured family.
pub fn fuzz_trial(config: &FuzzConfig, trial: usize) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    let dmax = config.denominator_max;
    let kind = config.catalog[rng.gen_range(0..config.catalog.len())];
    let (f, window) = standard_function(kind);
    let n = rng.gen_range(config.n_range.clone());
    let steps = rng.gen_range(config.steps_range.clone());
    let pattern = draw_pattern(&mut rng, n);
    let (p_counts, q_counts) = draw_weights(&mut rng, n, dmax, pattern);
    let p = normalize(&p_counts);
    let q1 = normalize(&q_counts);
    let x = draw_points(&mut rng, n, &window);
    let constant = rng.gen_bool(0.5);
    let mut fixed = vec![q1.clone()];
    for _ in 1..steps {
        fixed.push(if constant { q1.clone() } else { random_q(&mut rng, n, dmax) });
    }
    let gamma = match rng.gen_range(0..4) {
        0 => q1.clone(),
        _ => random_q(&mut rng, n, dmax),
    };
    let start = Mixture::new(&p, &x)?;
    let mut out = Vec::with_capacity(config.families.len());
    for family in Family::ALL {
        // Draw for every family so that selecting a subset does not shift the others.
        let q_seq = match family {
            Family::Dragomir | Family::Thm5 => QSeq::Explicit(vec![q1.clone()]),
            Family::Thm4 => QSeq::Explicit(vec![q1.clone(), gamma.clone()]),
            Family::Lower6 | Family::Upper7 => QSeq::Explicit(fixed.clone()),
            Family::Reduce8 | Family::Reduce9 => {
                QSeq::Explicit(reducing_qs(&mut rng, family, &start, &q1, steps, constant, dmax)?)
            }
        };
        if !config.families.contains(&family) {
            continue;
        }
        let n_steps = if family.chain().is_some() { steps } else { 1 };
        out.push(Instance {
            id: instance_id(trial, family),
            family,
            f: f.clone(),
            x: x.clone(),
            p: p.clone(),
            q_seq,
            n_steps,
        });
    }
    Ok(out)
}

/// All instances of a configuration, in trial order.
pub fn generate(config: &FuzzConfig) -> Result<Vec<Instance>> {
    config.validate()?;
    let mut all = Vec::with_capacity(config.trials * config.families.len());
    for t in 0..config.trials {
        all.extend(fuzz_trial(config, t)?);
    }
    Ok(all)
}

/// Runs and verifies one instance. Run errors become a failing report.
pub fn evaluate(instance: &Instance, mode: Arithmetic) -> (Option<RunRecord>, VerifyReport) {
    match instance.run(mode) {
        Ok(record) => {
            let report = verify_record(&record);
            (Some(record), report)
        }
        Err(e) => {
            let mut report = VerifyReport::new(instance.id.clone(), Some(instance.family));
            report.push(Check::error("run", None, &e));
            (None, report)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub family: Family,
    pub instances: usize,
    pub failures: usize,
    /// Chains with some multiplicity `s_k >= 2`.
    pub tie_instances: usize,
    pub stalled: usize,
    pub early_stop: usize,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckStats {
    pub dragomir: usize,
    pub remark1: usize,
    pub s1: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub id: String,
    pub family: Option<Family>,
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// One CSV row per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub id: String,
    pub family: String,
    pub defect: Option<f64>,
    pub worst_check: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<FuzzConfig>,
    pub instances: usize,
    pub failures: usize,
    pub pass: bool,
    pub worst_violation: f64,
    pub families: Vec<FamilyStats>,
    pub cross_checks: CrossCheckStats,
    /// Correction-term instances where some `α_i = β_i` still carries residual weight.
    pub residual_outside_j: usize,
    pub residual_outside_j_failures: usize,
    pub failed: Vec<FailureSummary>,
}

pub type Evaluated = (Option<RunRecord>, VerifyReport);

/// Sorts by instance id and folds the per-instance results into a report.
/// `config` is recorded as metadata only.
pub fn aggregate(config: Option<&FuzzConfig>, mut results: Vec<Evaluated>) -> (FuzzReport, Vec<SummaryRow>) {
    results.sort_by(|a, b| a.1.id.cmp(&b.1.id));
    let mut present: Vec<Family> = results.iter().filter_map(|r| r.1.family).collect();
    present.sort();
    present.dedup();
    let mut families: Vec<FamilyStats> = present
        .into_iter()
        .map(|family| FamilyStats {
            family,
            instances: 0,
            failures: 0,
            tie_instances: 0,
            stalled: 0,
            early_stop: 0,
            worst_violation: 0.0,
        })
        .collect();
    let mut cross = CrossCheckStats::default();
    let (mut outside, mut outside_failed) = (0, 0);
    let mut failed = Vec::new();
    let mut rows = Vec::with_capacity(results.len());
    let mut worst: f64 = 0.0;

    for (record, report) in &results {
        if let Some(stats) = report.family.and_then(|fam| families.iter_mut().find(|s| s.family == fam)) {
            stats.instances += 1;
            if !report.pass {
                stats.failures += 1;
                stats.worst_violation = stats.worst_violation.max(report.worst_violation);
            }
            if let Some(c) = record.as_ref().and_then(|r| r.outcome.chain()) {
                stats.tie_instances += usize::from(c.max_multiplicity() >= 2);
                stats.stalled += usize::from(c.stalled);
                stats.early_stop += usize::from(c.early_stop);
            }
        }
        let kinds = [("dragomir_", 0), ("remark1_", 1), ("s1_", 2)];
        let mut seen = [false; 3];
        for c in &report.checks {
            for (prefix, slot) in kinds {
                if c.name.starts_with(prefix) && c.name != "dragomir_lower" && c.name != "dragomir_upper" {
                    seen[slot] = true;
                    if !c.pass {
                        cross.failed += 1;
                    }
                }
            }
        }
        cross.dragomir += usize::from(seen[0]);
        cross.remark1 += usize::from(seen[1]);
        cross.s1 += usize::from(seen[2]);
        if let Some(Outcome::Ttd(t)) = record.as_ref().map(|r| &r.outcome) {
            if t.residual_outside_j {
                outside += 1;
                outside_failed += usize::from(!report.pass);
            }
        }
        worst = worst.max(report.worst_violation);
        let worst_check = report.worst_check();
        if let Some(c) = worst_check {
            failed.push(FailureSummary {
                id: report.id.clone(),
                family: report.family,
                check: c.name.clone(),
                step: c.step,
                violation: c.violation,
                detail: c.detail.clone(),
            });
        }
        rows.push(SummaryRow {
            id: report.id.clone(),
            family: report.family.map_or_else(String::new, |f| f.name().to_string()),
            defect: record.as_ref().map(|r| r.outcome.defect()),
            worst_check: worst_check.map_or_else(String::new, |c| c.name.clone()),
            pass: report.pass,
        });
    }
    let failures = failed.len();
    let report = FuzzReport {
        config: config.cloned(),
        instances: results.len(),
        failures,
        pass: failures == 0,
        worst_violation: worst,
        families,
        cross_checks: cross,
        residual_outside_j: outside,
        residual_outside_j_failures: outside_failed,
        failed,
    };
    (report, rows)
}

/// Sequential fuzzing: generate, evaluate and aggregate.
pub fn fuzz(config: &FuzzConfig) -> Result<(FuzzReport, Vec<SummaryRow>)> {
    let instances = generate(config)?;
    let results = instances.iter().map(|i| evaluate(i, config.mode)).collect();
    Ok(aggregate(Some(config), results))
}

/// Whether a weight vector has all denominators at most `dmax`.
pub fn denominators_at_most(w: &WeightVector, dmax: u64) -> bool {
    w.entries().iter().all(|r: &Rational| r.is_zero() || *r.denom() <= dmax.into())
}
