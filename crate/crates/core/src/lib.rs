//! Closed-form solutions of the linear oscillator with pure delay
//!
//! ```text
//!     ẍ(t) − Ω² x(t − 2τ) = f(t),   t ≥ 0,        x(t) = φ(t),   t ∈ [−2τ, 0],
//! ```
//!
//! built from the delayed exponential `exp_τ(·; Ω)`, together with a
//! method-of-steps oracle, the delay-free oscillator, and checks of the error
//! bounds for `τ → 0`.

pub mod analysis;
pub mod classical;
pub mod cli;
pub mod config;
pub mod dexp;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod steps;

pub use analysis::{
    bounds_report, corollary_check, lemma_check, solution_convergence_study, BoundsConstants, BoundsReport,
    ConvergenceRow, ConvergenceTable, HistoryFamily, LemmaRow, Slope, StudySettings,
};
pub use classical::{classical_solution, classical_velocity, ClassicalProblem};
pub use config::{ConfigError, ScenarioConfig};
pub use dexp::{DelayedExpEvaluator, FundamentalPair, Sign, MAX_KNOTS};
pub use error::{Error, Result};
pub use linalg::{inverse, matrix_exp, operator_norm, Operator};
pub use problem::{Continuity, DelayProblem, ForcingFunction, HistoryFunction, Smoothness, VectorFn};
pub use quadrature::{integrate, QuadratureRule, Scheme};
pub use solver::{DelaySolver, MildForm, Representation, Trajectory};
pub use steps::{apriori_check, integrate_segments, AprioriReport, SegmentSolution, StepSolution};
