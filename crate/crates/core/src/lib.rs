//! Normalized Jensen functionals, the Dragomir-type bounds built on them, and
//! recursive refinement chains that split one bound into an `N`-term sum.
//!
//! Weights are exact rationals throughout; function values are `f64` unless the
//! function admits exact rational evaluation (polynomial and piecewise-linear
//! members of the catalog), in which case every functional can also be carried
//! exactly.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel fuzzing live in the `jensen-chain` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod catalog;
pub mod chain;
pub mod error;
pub mod fuzz;
pub mod instance;
pub mod jensen;
pub mod rational;
pub mod verify;

pub use baseline::{
    check_dragomir, ratio_extremes, three_weight_bounds, ttd_bounds, DragomirReport,
    RatioExtremes, ThreeWeightReport, TtdReport, TtdTerms,
};
pub use catalog::{check_convexity, ConvexFn, FnKind};
pub use chain::{
    closed_form_mk, lower_chain, lower_step, reduce_lower_chain, reduce_lower_step,
    reduce_upper_chain, reduce_upper_step, upper_chain, upper_step, AutoUniform, ChainKind,
    ChainResult, ChainState, ExplicitQs, Mixture, QSource,
};
pub use error::Error;
pub use jensen::{barycenter, jensen, Arithmetic, PointVector, WeightVector};
pub use rational::Rational;
pub use fuzz::{FuzzConfig, FuzzReport, SummaryRow};
pub use instance::{verify_record, Family, Instance, Outcome, QSeq, RunRecord};
pub use verify::{Check, VerifyReport};
