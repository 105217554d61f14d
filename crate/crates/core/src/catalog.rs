//! The closed catalog of convex functions on `[a, b)` and a sampling convexity check.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnKind {
    Square,
    Abs,
    Exp,
    FourthPower,
    NegLog,
    PiecewiseLinear,
}

impl FnKind {
    pub const ALL: [FnKind; 6] = [
        FnKind::Square,
        FnKind::Abs,
        FnKind::Exp,
        FnKind::FourthPower,
        FnKind::NegLog,
        FnKind::PiecewiseLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FnKind::Square => "square",
            FnKind::Abs => "abs",
            FnKind::Exp => "exp",
            FnKind::FourthPower => "fourth_power",
            FnKind::NegLog => "neg_log",
            FnKind::PiecewiseLinear => "piecewise_linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        FnKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown function kind {name:?}")))
    }
}

/// A convex function on the half-open interval `[a, b)`; `b = None` means `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFn", into = "RawFn")]
pub struct ConvexFn {
    kind: FnKind,
    a: Rational,
    b: Option<Rational>,
    breakpoints: Vec<(Rational, Rational)>,
}

/// Sampling window for unbounded domains.
const UNBOUNDED_WINDOW: f64 = 1e6;

impl ConvexFn {
    pub fn new(kind: FnKind, a: Rational, b: Option<Rational>) -> Result<Self> {
        if kind == FnKind::PiecewiseLinear {
            return Err(Error::InvalidFunction(
                "piecewise_linear needs breakpoints".to_string(),
            ));
        }
        Self::validated(kind, a, b, Vec::new())
    }

    pub fn piecewise_linear(
        a: Rational,
        b: Option<Rational>,
        breakpoints: Vec<(Rational, Rational)>,
    ) -> Result<Self> {
        Self::validated(FnKind::PiecewiseLinear, a, b, breakpoints)
    }

    fn validated(
        kind: FnKind,
        a: Rational,
        b: Option<Rational>,
        breakpoints: Vec<(Rational, Rational)>,
    ) -> Result<Self> {
        if let Some(b) = &b {
            if *b <= a {
                return Err(Error::InvalidFunction(format!(
                    "empty domain [{}, {})",
                    rational::format_point(&a),
                    rational::format_point(b)
                )));
            }
        }
        if kind == FnKind::NegLog && !a.is_positive() {
            return Err(Error::InvalidFunction(
                "neg_log needs a domain with a > 0".to_string(),
            ));
        }
        if kind == FnKind::PiecewiseLinear {
            if breakpoints.len() < 2 {
                return Err(Error::InvalidFunction(
                    "piecewise_linear needs at least two breakpoints".to_string(),
                ));
            }
            if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidFunction(
                    "breakpoints must be strictly increasing".to_string(),
                ));
            }
            let slopes: Vec<Rational> = breakpoints.windows(2).map(|w| segment_slope(&w[0], &w[1])).collect();
            if slopes.windows(2).any(|s| s[1] < s[0]) {
                return Err(Error::InvalidFunction(
                    "breakpoint slopes must be nondecreasing".to_string(),
                ));
            }
        } else if !breakpoints.is_empty() {
            return Err(Error::InvalidFunction(format!(
                "{} takes no breakpoints",
                kind.name()
            )));
        }
        Ok(ConvexFn { kind, a, b, breakpoints })
    }

    /// Builds a piecewise-linear function without the slope check.
    ///
    /// Only useful as a negative control for [`check_convexity`].
    pub fn piecewise_linear_unchecked(
        a: Rational,
        b: Option<Rational>,
        breakpoints: Vec<(Rational, Rational)>,
    ) -> Self {
        ConvexFn { kind: FnKind::PiecewiseLinear, a, b, breakpoints }
    }

    pub fn kind(&self) -> FnKind {
        self.kind
    }

    pub fn lower(&self) -> &Rational {
        &self.a
    }

    pub fn upper(&self) -> Option<&Rational> {
        self.b.as_ref()
    }

    pub fn breakpoints(&self) -> &[(Rational, Rational)] {
        &self.breakpoints
    }

    pub fn contains(&self, x: &Rational) -> bool {
        *x >= self.a && self.b.as_ref().is_none_or(|b| x < b)
    }

    fn check_domain(&self, x: &Rational) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::domain(x, &self.a, self.b.as_ref()))
        }
    }

    /// Whether [`ConvexFn::eval_exact`] returns a value.
    pub fn is_exact(&self) -> bool {
        matches!(
            self.kind,
            FnKind::Square | FnKind::Abs | FnKind::FourthPower | FnKind::PiecewiseLinear
        )
    }

    /// Pointwise value at a real argument.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let inside = x >= to_f64(&self.a) && self.b.as_ref().is_none_or(|b| x < to_f64(b));
        if !inside || x.is_nan() {
            return Err(Error::Domain {
                x: format!("{x}"),
                a: rational::format_point(&self.a),
                b: self.b.as_ref().map_or_else(|| "inf".to_string(), rational::format_point),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            FnKind::Square => x * x,
            FnKind::Abs => libm::fabs(x),
            FnKind::Exp => libm::exp(x),
            FnKind::FourthPower => {
                let s = x * x;
                s * s
            }
            FnKind::NegLog => -libm::log(x),
            FnKind::PiecewiseLinear => {
                let bp: Vec<(f64, f64)> = self
                    .breakpoints
                    .iter()
                    .map(|(u, v)| (to_f64(u), to_f64(v)))
                    .collect();
                let i = segment_index(&bp, |(u, _)| x < *u);
                let ((x0, y0), (x1, y1)) = (bp[i], bp[i + 1]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `f(x)` in floating point, with the domain test done exactly.
    pub fn eval_rational(&self, x: &Rational) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self.eval_exact_unchecked(x) {
            Some(v) => to_f64(&v),
            None => self.eval_unchecked(to_f64(x)),
        })
    }

    /// `f(x)` as an exact rational; `Ok(None)` for transcendental kinds.
    pub fn eval_exact(&self, x: &Rational) -> Result<Option<Rational>> {
        self.check_domain(x)?;
        Ok(self.eval_exact_unchecked(x))
    }

    fn eval_exact_unchecked(&self, x: &Rational) -> Option<Rational> {
        match self.kind {
            FnKind::Square => Some(x * x),
            FnKind::Abs => Some(x.abs()),
            FnKind::FourthPower => {
                let s = x * x;
                Some(&s * &s)
            }
            FnKind::PiecewiseLinear => {
                let bp = &self.breakpoints;
                let i = segment_index(bp, |(u, _)| x < u);
                let (p0, p1) = (&bp[i], &bp[i + 1]);
                Some(&p0.1 + segment_slope(p0, p1) * (x - &p0.0))
            }
            FnKind::Exp | FnKind::NegLog => None,
        }
    }
}

fn segment_slope(p0: &(Rational, Rational), p1: &(Rational, Rational)) -> Rational {
    (&p1.1 - &p0.1) / (&p1.0 - &p0.0)
}

/// Index of the segment used for `x`; the outer segments extend to infinity.
fn segment_index<T>(bp: &[T], is_left_of: impl Fn(&T) -> bool) -> usize {
    let last = bp.len() - 2;
    (1..bp.len() - 1).find(|&i| is_left_of(&bp[i])).map_or(last, |i| i - 1)
}

/// Midpoint-convexity test on `grid_size` equispaced samples of the domain.
///
/// Unbounded domains are sampled on `[a, a + 1e6)`. Every sampled pair
/// `u < v` must satisfy `f((u+v)/2) <= (f(u)+f(v))/2 + 1e-12 (1 + |f(u)| + |f(v)|)`.
pub fn check_convexity(f: &ConvexFn, grid_size: usize) -> bool {
    let grid_size = grid_size.max(3);
    let lo = to_f64(&f.a);
    let hi = f.b.as_ref().map_or(lo + UNBOUNDED_WINDOW, |b| to_f64(b).min(lo + UNBOUNDED_WINDOW));
    let step = (hi - lo) / grid_size as f64;
    let samples: Vec<(f64, f64)> = (0..grid_size)
        .map(|i| {
            let t = lo + step * i as f64;
            (t, f.eval_unchecked(t))
        })
        .collect();
    samples.iter().enumerate().all(|(i, &(u, fu))| {
        samples[i + 1..].iter().all(|&(v, fv)| {
            let mid = f.eval_unchecked(0.5 * (u + v));
            let tol = 1e-12 * (1.0 + libm::fabs(fu) + libm::fabs(fv));
            mid <= 0.5 * (fu + fv) + tol
        })
    })
}

#[derive(Serialize, Deserialize)]
struct RawFn {
    kind: FnKind,
    #[serde(with = "rational::as_point")]
    a: Rational,
    b: Bound,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    breakpoints: Vec<RawPair>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Inf(InfTag),
    Finite(#[serde(with = "rational::as_point")] Rational),
}

#[derive(Serialize, Deserialize)]
enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Serialize, Deserialize)]
struct RawPair(
    #[serde(with = "rational::as_point")] Rational,
    #[serde(with = "rational::as_point")] Rational,
);

impl TryFrom<RawFn> for ConvexFn {
    type Error = String;

    fn try_from(raw: RawFn) -> core::result::Result<Self, String> {
        let b = match raw.b {
            Bound::Inf(_) => None,
            Bound::Finite(b) => Some(b),
        };
        let bp = raw.breakpoints.into_iter().map(|RawPair(u, v)| (u, v)).collect();
        ConvexFn::validated(raw.kind, raw.a, b, bp).map_err(|e| e.to_string())
    }
}

impl From<ConvexFn> for RawFn {
    fn from(f: ConvexFn) -> Self {
        RawFn {
            kind: f.kind,
            a: f.a,
            b: f.b.map_or(Bound::Inf(InfTag::Inf), Bound::Finite),
            breakpoints: f.breakpoints.into_iter().map(|(u, v)| RawPair(u, v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn pl(points: &[(i64, i64)]) -> Vec<(Rational, Rational)> {
        points.iter().map(|&(u, v)| (int(u), int(v))).collect()
    }

    #[test]
    fn eval_examples() {
        let sq = ConvexFn::new(FnKind::Square, int(-10), None).unwrap();
        assert_eq!(sq.eval(0.5).unwrap(), 0.25);
        let abs = ConvexFn::new(FnKind::Abs, int(-10), None).unwrap();
        assert_eq!(abs.eval(-1.0).unwrap(), 1.0);
        // (0,0),(1,0),(2,2) at 1.5: halfway up the 0 -> 2 segment.
        let f = ConvexFn::piecewise_linear(int(0), Some(int(3)), pl(&[(0, 0), (1, 0), (2, 2)])).unwrap();
        assert_eq!(f.eval(1.5).unwrap(), 1.0);
        assert_eq!(f.eval_exact(&ratio(3, 2)).unwrap(), Some(int(1)));
        // beyond the last breakpoint the last segment is extended
        assert_eq!(f.eval_exact(&ratio(5, 2)).unwrap(), Some(int(3)));
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let f = ConvexFn::new(FnKind::Square, int(0), Some(int(1))).unwrap();
        assert!(matches!(f.eval(1.0), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(f64::NAN), Err(Error::Domain { .. })));
        assert!(f.eval_rational(&int(1)).is_err());
        assert!(f.eval_rational(&int(0)).is_ok());
    }

    #[test]
    fn construction_invariants() {
        assert!(ConvexFn::new(FnKind::Square, int(1), Some(int(1))).is_err());
        assert!(ConvexFn::new(FnKind::NegLog, int(0), None).is_err());
        assert!(ConvexFn::new(FnKind::NegLog, ratio(1, 10), None).is_ok());
        assert!(ConvexFn::piecewise_linear(int(0), None, pl(&[(0, 0), (1, 1), (2, 1)])).is_err());
        assert!(ConvexFn::piecewise_linear(int(0), None, pl(&[(0, 0), (0, 1)])).is_err());
        assert!(ConvexFn::piecewise_linear(int(0), None, pl(&[(0, 0)])).is_err());
        assert!(ConvexFn::new(FnKind::PiecewiseLinear, int(0), None).is_err());
    }

    #[test]
    fn convexity_examples() {
        let sq = ConvexFn::new(FnKind::Square, int(-5), Some(int(5))).unwrap();
        assert!(check_convexity(&sq, 101));
        let concave = ConvexFn::piecewise_linear_unchecked(int(0), Some(int(2)), pl(&[(0, 0), (1, 1), (2, 1)]));
        assert!(!check_convexity(&concave, 101));
        let nl = ConvexFn::new(FnKind::NegLog, ratio(1, 10), Some(int(10))).unwrap();
        assert!(check_convexity(&nl, 101));
    }

    #[test]
    fn every_kind_is_convex_on_its_window() {
        for kind in FnKind::ALL {
            let f = match kind {
                FnKind::PiecewiseLinear => {
                    ConvexFn::piecewise_linear(int(-3), None, pl(&[(-1, 1), (0, 0), (1, 0), (2, 3)])).unwrap()
                }
                FnKind::NegLog => ConvexFn::new(kind, ratio(1, 100), Some(int(20))).unwrap(),
                _ => ConvexFn::new(kind, int(-4), Some(int(4))).unwrap(),
            };
            for grid in [3, 17, 64] {
                assert!(check_convexity(&f, grid), "{kind:?} grid {grid}");
            }
        }
        // unbounded window
        let sq = ConvexFn::new(FnKind::Square, int(0), None).unwrap();
        assert!(check_convexity(&sq, 50));
    }

    #[test]
    fn json_shape() {
        let f = ConvexFn::piecewise_linear(int(0), None, pl(&[(0, 0), (1, 0), (2, 2)])).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"kind":"piecewise_linear","a":"0","b":"inf","breakpoints":[["0","0"],["1","0"],["2","2"]]}"#);
        let back: ConvexFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let g: ConvexFn = serde_json::from_str(r#"{"kind":"neg_log","a":0.1,"b":10}"#).unwrap();
        assert_eq!(g.lower(), &ratio(1, 10));
        assert!(serde_json::from_str::<ConvexFn>(r#"{"kind":"neg_log","a":0,"b":"inf"}"#).is_err());
    }

    proptest::proptest! {
        #[test]
        fn eval_is_pure(x in -3.0f64..3.0) {
            for kind in [FnKind::Square, FnKind::Abs, FnKind::Exp, FnKind::FourthPower] {
                let f = ConvexFn::new(kind, int(-4), None).unwrap();
                proptest::prop_assert_eq!(f.eval(x).unwrap().to_bits(), f.eval(x).unwrap().to_bits());
            }
        }
    }
}
