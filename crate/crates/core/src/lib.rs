//! Risk-averse sample average approximation with explicit nonasymptotic
//! deviation bounds.
//!
//! The crate solves `inf_θ ρ(G(θ, Z))` and its empirical counterpart for the
//! expectation, the mean upper semideviation and divergence risks (optimized
//! certainty equivalents, AVaR among them), evaluates exponential tail bounds
//! for the optimal-value error, and checks them by Monte Carlo.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dist;
pub mod entropy;
pub mod error;
pub mod goal;
pub mod harness;
pub mod problems;
pub mod quad;
pub mod risk;
pub mod saa;

pub use bounds::{BoundContext, BoundInputs, BoundStatus, CompactInterval, RemainderMode, TailBoundResult};
pub use dist::{EmpiricalDistribution, MomentTable, Sample, SourceDistribution, SourceKind};
pub use entropy::{EntropyBound, EntropySource};
pub use error::{Error, Result};
pub use goal::{EnvelopeSpec, GoalSpec, HoelderForm, HoelderGoal, ParamBox, PlGoal};
pub use harness::{ExperimentConfig, ReplicationSet, TailRow, TightnessReport, Verdict};
pub use risk::{PhiFamily, RiskFunctional, SemideviationParams};
pub use saa::{GridSpec, SaaProblem, SolveResult, TrueOptimum};
