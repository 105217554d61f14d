//! Self-contained problem instances and their evaluation.
//!
//! An [`Instance`] packages a function, points, a weight vector and the
//! a-priori weights each family needs. `q_seq` is read per family:
//!
//! | family | `q_seq` |
//! |---|---|
//! | `dragomir` | `[q]` |
//! | `thm4` | `[β, γ]`, with `α = p` |
//! | `thm5` | `[β]`, with `α = p` |
//! | chains | one vector per step, or `"auto-uniform"` |

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use num_traits::Signed;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baseline::{check_dragomir, three_weight_bounds, ttd_bounds, DragomirReport, ThreeWeightReport, TtdReport};
use crate::catalog::ConvexFn;
use crate::chain::{
    lower_chain, reduce_lower_chain, reduce_lower_step, reduce_upper_chain, reduce_upper_step, upper_chain,
    AutoUniform, ChainKind, ChainResult, ExplicitQs, Mixture, QSource,
};
use crate::error::{Error, Result};
use crate::jensen::{Arithmetic, PointVector, Value, WeightVector};
use crate::verify::{self, Check, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dragomir,
    Lower6,
    Upper7,
    Reduce8,
    Reduce9,
    Thm4,
    Thm5,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Dragomir,
        Family::Lower6,
        Family::Upper7,
        Family::Reduce8,
        Family::Reduce9,
        Family::Thm4,
        Family::Thm5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dragomir => "dragomir",
            Family::Lower6 => "lower6",
            Family::Upper7 => "upper7",
            Family::Reduce8 => "reduce8",
            Family::Reduce9 => "reduce9",
            Family::Thm4 => "thm4",
            Family::Thm5 => "thm5",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown family {name:?}")))
    }

    /// `(kind, reducing)` for the chain families.
    pub fn chain(self) -> Option<(ChainKind, bool)> {
        match self {
            Family::Lower6 => Some((ChainKind::Lower, false)),
            Family::Upper7 => Some((ChainKind::Upper, false)),
            Family::Reduce8 => Some((ChainKind::Lower, true)),
            Family::Reduce9 => Some((ChainKind::Upper, true)),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const AUTO_UNIFORM: &str = "auto-uniform";

#[derive(Debug, Clone, PartialEq)]
pub enum QSeq {
    AutoUniform,
    Explicit(Vec<WeightVector>),
}

impl QSeq {
    pub fn explicit(&self) -> Option<&[WeightVector]> {
        match self {
            QSeq::AutoUniform => None,
            QSeq::Explicit(v) => Some(v),
        }
    }
}

impl Serialize for QSeq {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            QSeq::AutoUniform => s.serialize_str(AUTO_UNIFORM),
            QSeq::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for QSeq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tag(String),
            List(Vec<WeightVector>),
        }
        match Raw::deserialize(d)? {
            Raw::Tag(t) if t == AUTO_UNIFORM => Ok(QSeq::AutoUniform),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown q_seq {t:?}"))),
            Raw::List(v) => Ok(QSeq::Explicit(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub family: Family,
    pub f: ConvexFn,
    pub x: PointVector,
    pub p: WeightVector,
    pub q_seq: QSeq,
    #[serde(rename = "N")]
    pub n_steps: usize,
}

fn positive(q: &WeightVector, what: &str) -> Result<()> {
    if q.entries().iter().all(Signed::is_positive) {
        Ok(())
    } else {
        Err(Error::InvalidWeights(format!("{what} must be strictly positive")))
    }
}

impl Instance {
    /// Shape and domain checks. For reducing families the lengths each step
    /// will need are simulated from the weights alone.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.p.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: self.p.len() });
        }
        self.x.check_domain(&self.f)?;
        if self.n_steps == 0 {
            return Err(Error::Config("N must be at least 1".to_string()));
        }
        let needed = match self.family {
            Family::Dragomir | Family::Thm5 => 1,
            Family::Thm4 => 2,
            _ => self.n_steps,
        };
        let Some(qs) = self.q_seq.explicit() else {
            return match self.family.chain() {
                Some(_) => Ok(()),
                None => Err(Error::Config(format!("{} needs explicit weight vectors", self.family))),
            };
        };
        let baseline = self.family.chain().is_none();
        if baseline && qs.len() != needed {
            return Err(Error::Config(format!("{} takes {needed} q vectors, got {}", self.family, qs.len())));
        }
        match self.family {
            Family::Reduce8 | Family::Reduce9 => self.simulate_lengths(qs),
            Family::Thm4 => {
                for q in qs {
                    if q.len() != n {
                        return Err(Error::LengthMismatch { expected: n, found: q.len() });
                    }
                }
                let sums_positive = qs[0].entries().iter().zip(qs[1].entries()).all(|(b, g)| (b + g).is_positive());
                if sums_positive {
                    Ok(())
                } else {
                    Err(Error::InvalidWeights("β + γ must be strictly positive".to_string()))
                }
            }
            _ => {
                if qs.len() < needed {
                    return Err(Error::Config(format!("{needed} q vectors needed, got {}", qs.len())));
                }
                for (k, q) in qs.iter().enumerate() {
                    if q.len() != n {
                        return Err(Error::ShapeMismatch { step: k + 1, expected: n, found: q.len() });
                    }
                    positive(q, "q")?;
                }
                Ok(())
            }
        }
    }

    fn simulate_lengths(&self, qs: &[WeightVector]) -> Result<()> {
        let mut state = Mixture::new(&self.p, &self.x)?;
        let mut pivot = None;
        for k in 1..=self.n_steps {
            if self.family == Family::Reduce8 && k > 1 && state.len() == 1 {
                return Ok(());
            }
            let mut source = ExplicitQs::new(qs);
            let q = source.next_q(k, state.len())?;
            positive(&q, "q")?;
            state = if self.family == Family::Reduce8 {
                reduce_lower_step(&state, &q)?.next
            } else {
                let step = reduce_upper_step(&state, &q, pivot)?;
                pivot = Some(step.next_pivot);
                step.next
            };
        }
        Ok(())
    }

    /// Runs a chain family.
    pub fn run_chain(&self) -> Result<ChainResult> {
        let (f, x, p, n) = (&self.f, &self.x, &self.p, self.n_steps);
        let mut auto = AutoUniform;
        let mut explicit;
        let qs: &mut dyn QSource = match &self.q_seq {
            QSeq::AutoUniform => &mut auto,
            QSeq::Explicit(v) => {
                explicit = ExplicitQs::new(v);
                &mut explicit
            }
        };
        match self.family {
            Family::Lower6 => lower_chain(f, x, p, qs, n),
            Family::Upper7 => upper_chain(f, x, p, qs, n),
            Family::Reduce8 => reduce_lower_chain(f, x, p, qs, n),
            Family::Reduce9 => reduce_upper_chain(f, x, p, qs, n),
            other => Err(Error::Config(format!("{other} is not a chain family"))),
        }
    }

    pub fn run(&self, mode: Arithmetic) -> Result<RunRecord> {
        self.validate()?;
        let qs = self.q_seq.explicit().unwrap_or(&[]);
        let outcome = match self.family {
            Family::Dragomir => Outcome::Dragomir(check_dragomir(&self.f, &self.x, &self.p, &qs[0])?),
            Family::Thm4 => Outcome::ThreeWeight(three_weight_bounds(&self.f, &self.x, &self.p, &qs[0], &qs[1])?),
            Family::Thm5 => Outcome::Ttd(ttd_bounds(&self.f, &self.x, &self.p, &qs[0])?),
            _ => Outcome::Chain(self.run_chain()?),
        };
        let ok = outcome.ok(mode);
        Ok(RunRecord { instance: self.clone(), mode, outcome, ok })
    }

    /// Explicit vectors for every step, uniform ones when `q_seq` is automatic.
    fn fixed_length_qs(&self) -> Result<Vec<WeightVector>> {
        match &self.q_seq {
            QSeq::Explicit(v) => Ok(v.clone()),
            QSeq::AutoUniform => (0..self.n_steps).map(|_| WeightVector::uniform(self.x.len())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "result", rename_all = "snake_case")]
pub enum Outcome {
    Dragomir(DragomirReport),
    ThreeWeight(ThreeWeightReport),
    Ttd(TtdReport),
    Chain(ChainResult),
}

impl Outcome {
    /// The sign or bound claim of the family, exact where `mode` and `f` allow.
    pub fn ok(&self, mode: Arithmetic) -> bool {
        self.claims(mode).iter().all(|c| c.pass)
    }

    fn claims(&self, mode: Arithmetic) -> Vec<Check> {
        match self {
            Outcome::Dragomir(r) => vec![
                Check::at_least("dragomir_lower", None, r.j_p.clone(), r.j_q.scaled(&r.m), r.tolerance, mode),
                Check::at_least("dragomir_upper", None, r.j_q.scaled(&r.big_m), r.j_p.clone(), r.tolerance, mode),
            ],
            Outcome::ThreeWeight(r) => vec![
                Check::at_least("three_weight_lower", None, r.j_alpha.clone(), r.lower.clone(), r.tolerance, mode),
                Check::at_least("three_weight_upper", None, r.upper.clone(), r.j_alpha.clone(), r.tolerance, mode),
            ],
            Outcome::Ttd(r) => vec![
                Check::at_least("ttd_lower", None, r.j_alpha.clone(), r.lower.clone(), r.tolerance, mode),
                Check::at_least("ttd_upper", None, r.upper.clone(), r.j_alpha.clone(), r.tolerance, mode)
                    .with_detail(format!("residual_outside_j = {}", r.residual_outside_j)),
            ],
            Outcome::Chain(c) => {
                let tol = c.tolerance();
                vec![match c.kind {
                    ChainKind::Lower => Check::at_least("defect_sign", None, c.defect_value(), Value::zero(), tol, mode),
                    ChainKind::Upper => Check::at_least("defect_sign", None, Value::zero(), c.defect_value(), tol, mode),
                }]
            }
        }
    }

    /// Headline number: the chain defect, or the slack of the lower bound.
    pub fn defect(&self) -> f64 {
        match self {
            Outcome::Dragomir(r) => r.lower_residual.approx,
            Outcome::ThreeWeight(r) => r.j_alpha.approx - r.lower.approx,
            Outcome::Ttd(r) => r.j_alpha.approx - r.lower.approx,
            Outcome::Chain(c) => c.defect,
        }
    }

    pub fn chain(&self) -> Option<&ChainResult> {
        match self {
            Outcome::Chain(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: Instance,
    pub mode: Arithmetic,
    pub outcome: Outcome,
    pub ok: bool,
}

/// Full verification of a stored record: the family's claims, the chain
/// oracles on the stored trace, a rerun comparison and the cross-checks.
pub fn verify_record(record: &RunRecord) -> VerifyReport {
    let inst = &record.instance;
    let mode = record.mode;
    let mut report = VerifyReport::new(inst.id.clone(), Some(inst.family));
    if let Err(e) = inst.validate() {
        report.push(Check::error("instance", None, &e));
        return report;
    }
    report.extend(record.outcome.claims(mode));
    let (f, x, p) = (&inst.f, &inst.x, &inst.p);
    match &record.outcome {
        Outcome::Chain(c) => {
            report.extend(verify::chain_checks(f, c, mode));
            match inst.run_chain() {
                Ok(fresh) => {
                    let same = fresh.trace == c.trace && fresh.terminal == c.terminal && fresh.extremes == c.extremes;
                    let check = Check::count("rerun_trace", None, c.trace.len(), fresh.trace.len());
                    report.push(Check { pass: check.pass && same, ..check });
                }
                Err(e) => report.push(Check::error("rerun_trace", None, &e)),
            }
        }
        other => match inst.run(mode) {
            Ok(fresh) => {
                let check = Check::count("rerun_report", None, usize::from(fresh.outcome == *other), 1);
                report.push(check);
            }
            Err(e) => report.push(Check::error("rerun_report", None, &e)),
        },
    }
    match inst.family {
        Family::Dragomir => {
            if let Some(qs) = inst.q_seq.explicit() {
                report.extend(verify::dragomir_consistency(f, x, p, &qs[0], mode));
            }
        }
        Family::Upper7 | Family::Reduce9 => match inst.fixed_length_qs() {
            Ok(qs) => report.extend(verify::remark1_consistency(f, x, p, &qs, inst.n_steps)),
            Err(e) => report.push(Check::error("remark1_trace", None, &e)),
        },
        Family::Lower6 | Family::Reduce8 => report.extend(verify::s1_consistency(f, x, p, inst.n_steps, mode)),
        Family::Thm4 | Family::Thm5 => {}
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::FnKind;
    use crate::rational::{int, ratio};

    fn w(v: &[(i64, i64)]) -> WeightVector {
        WeightVector::new(v.iter().map(|&(a, b)| ratio(a, b)).collect()).unwrap()
    }

    fn instance(family: Family, q_seq: QSeq, n_steps: usize) -> Instance {
        Instance {
            id: "i".to_string(),
            family,
            f: ConvexFn::new(FnKind::Square, int(-10), None).unwrap(),
            x: PointVector::new(vec![int(0), int(1)]).unwrap(),
            p: w(&[(1, 2), (1, 2)]),
            q_seq,
            n_steps,
        }
    }

    #[test]
    fn worked_instance_runs_and_verifies() {
        let q = w(&[(1, 4), (3, 4)]);
        let inst = instance(Family::Lower6, QSeq::Explicit(vec![q.clone()]), 1);
        let rec = inst.run(Arithmetic::Exact).unwrap();
        assert!(rec.ok);
        assert_eq!(rec.outcome.chain().unwrap().defect_exact, Some(ratio(1, 8)));
        let report = verify_record(&rec);
        assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
        // Uniform q ties both ratios of p, so the s = 1 cross-check does not apply.
        assert!(!report.checks.iter().any(|c| c.name.starts_with("s1_")));
    }

    #[test]
    fn every_family_round_trips_through_json() {
        let q = w(&[(1, 4), (3, 4)]);
        let cases = [
            (Family::Dragomir, QSeq::Explicit(vec![q.clone()])),
            (Family::Thm4, QSeq::Explicit(vec![q.clone(), w(&[(1, 2), (1, 2)])])),
            (Family::Thm5, QSeq::Explicit(vec![q.clone()])),
            (Family::Upper7, QSeq::AutoUniform),
            (Family::Reduce8, QSeq::AutoUniform),
            (Family::Reduce9, QSeq::Explicit(vec![q.clone(), q.clone()])),
        ];
        for (family, q_seq) in cases {
            let inst = instance(family, q_seq, 2);
            let rec = inst.run(Arithmetic::Exact).unwrap();
            let json = serde_json::to_string(&rec).unwrap();
            let back: RunRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back.instance, rec.instance);
            let report = verify_record(&back);
            assert!(report.pass, "{family}: {:?}", report.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn reduce9_with_p_equal_q_collapses() {
        let q = w(&[(1, 2), (1, 2)]);
        let inst = instance(Family::Reduce9, QSeq::Explicit(vec![q.clone(), WeightVector::uniform(1).unwrap()]), 2);
        let rec = inst.run(Arithmetic::Exact).unwrap();
        let c = rec.outcome.chain().unwrap();
        assert_eq!(c.terminal.len(), 1);
        assert_eq!(c.defect_exact, Some(int(0)));
    }

    #[test]
    fn shape_errors_at_load() {
        let inst = instance(Family::Dragomir, QSeq::AutoUniform, 1);
        assert!(matches!(inst.validate(), Err(Error::Config(_))));
        let inst = instance(Family::Lower6, QSeq::Explicit(vec![WeightVector::uniform(3).unwrap()]), 1);
        assert!(matches!(inst.validate(), Err(Error::ShapeMismatch { step: 1, .. })));
        let half = w(&[(1, 2), (1, 2)]);
        let inst = instance(Family::Reduce9, QSeq::Explicit(vec![half.clone(), half]), 2);
        assert_eq!(inst.validate(), Err(Error::ShapeMismatch { step: 2, expected: 1, found: 2 }));
        let inst = instance(Family::Lower6, QSeq::Explicit(vec![w(&[(0, 1), (1, 1)])]), 1);
        assert!(matches!(inst.validate(), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn q_seq_serde() {
        assert_eq!(serde_json::to_string(&QSeq::AutoUniform).unwrap(), "\"auto-uniform\"");
        let q: QSeq = serde_json::from_str("[[\"1/4\", \"3/4\"]]").unwrap();
        assert_eq!(q, QSeq::Explicit(vec![w(&[(1, 4), (3, 4)])]));
        assert!(serde_json::from_str::<QSeq>("\"uniform\"").is_err());
    }
}
