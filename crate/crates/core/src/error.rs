use alloc::string::String;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {x} lies outside the domain [{a}, {b})")]
    Domain { x: String, a: String, b: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("zero denominator at index {index}")]
    ZeroDenominator { index: usize },

    #[error("step {step}: q has length {found}, the chain needs {expected}")]
    ShapeMismatch {
        step: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(x: &Rational, a: &Rational, b: Option<&Rational>) -> Self {
        use alloc::string::ToString;
        Error::Domain {
            x: crate::rational::format_point(x),
            a: crate::rational::format_point(a),
            b: b.map_or_else(|| "inf".to_string(), crate::rational::format_point),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
