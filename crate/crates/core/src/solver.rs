//! Closed-form solutions of the delay problem through `x¹_τ` and `x²_τ`.
//!
//! Classical form (`φ ∈ C²`, `f ∈ C⁰`):
//!
//! ```text
//!     x(t) = x¹_τ(t+τ)φ(−2τ) + x²_τ(t+2τ)φ̇(−2τ) + ∫_{−2τ}^0 x²_τ(t−s)φ̈(s) ds
//!          + [t ≥ 0] ∫_0^t x²_τ(t−s) f(s) ds
//! ```
//!
//! Mild form (`φ ∈ C¹`), obtained by integrating the `φ̈` term by parts:
//!
//! ```text
//!     x(t) = x¹_τ(t+τ)φ(−2τ) + x²_τ(t)φ̇(0) + ∫_{−2τ}^0 ẋ²_τ(t−s)φ̇(s) ds + [t ≥ 0] (forced term)
//! ```
//!
//! [`MildForm::Printed`] keeps the alternative sign pattern
//! `x²_τ(t+2τ)φ̇(0) − ∫ ẋ²_τ(t−s)φ̇(s) ds` for comparison; it does not
//! reproduce the step solution and is not the default.

use std::sync::Arc;

use crate::dexp::DelayedExpEvaluator;
use crate::error::Result;
use crate::linalg::{axpy, Operator};
use crate::problem::DelayProblem;
use crate::quadrature::{integrate, QuadratureRule};

/// Which sign pattern the mild representation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MildForm {
    /// `x²_τ(t)φ̇(0) + ∫ ẋ²_τ(t−s)φ̇(s) ds`
    #[default]
    Derived,
    /// `x²_τ(t+2τ)φ̇(0) − ∫ ẋ²_τ(t−s)φ̇(s) ds`
    Printed,
}

/// Which representation a [`Trajectory`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Classical,
    Mild,
}

/// Evaluates the representation formulas for one problem.
#[derive(Debug, Clone)]
pub struct DelaySolver {
    problem: Arc<DelayProblem>,
    evaluator: Arc<DelayedExpEvaluator>,
    rule: QuadratureRule,
    mild_form: MildForm,
}

impl DelaySolver {
    pub fn new(problem: DelayProblem) -> Result<Self> {
        Self::with_rule(problem, QuadratureRule::default())
    }

    pub fn with_rule(problem: DelayProblem, rule: QuadratureRule) -> Result<Self> {
        let evaluator = DelayedExpEvaluator::new(problem.omega().clone(), problem.tau())?;
        Ok(Self { problem: Arc::new(problem), evaluator: Arc::new(evaluator), rule, mild_form: MildForm::default() })
    }

    pub fn with_mild_form(mut self, form: MildForm) -> Self {
        self.mild_form = form;
        self
    }

    pub fn problem(&self) -> &DelayProblem {
        &self.problem
    }

    pub fn evaluator(&self) -> &DelayedExpEvaluator {
        &self.evaluator
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn mild_form(&self) -> MildForm {
        self.mild_form
    }

    fn tau(&self) -> f64 {
        self.problem.tau()
    }

    /// Points `s ∈ [a, b]` where `t − s` is a multiple of `τ`, plus `extra`.
    fn convolution_knots(&self, t: f64, a: f64, b: f64, extra: &[f64]) -> Vec<f64> {
        let tau = self.tau();
        let lo = ((t - b) / tau).floor() as i64;
        let hi = ((t - a) / tau).ceil() as i64;
        let mut knots: Vec<f64> = (lo..=hi).map(|k| t - k as f64 * tau).filter(|s| *s >= a && *s <= b).collect();
        knots.extend_from_slice(extra);
        knots
    }

    /// `∫_a^b K(t−s) g(s) ds` with the kernel given as an operator-valued closure.
    fn convolve<K, G>(&self, kernel: K, g: G, t: f64, a: f64, b: f64, extra_knots: &[f64]) -> Result<Vec<f64>>
    where
        K: Fn(f64) -> Result<Operator>,
        G: Fn(f64) -> Result<Vec<f64>>,
    {
        let knots = self.convolution_knots(t, a, b, extra_knots);
        let mut failure = None;
        let dim = self.problem.dim();
        let value = integrate(
            |s| match kernel(t - s).and_then(|k| Ok(k.apply(&g(s)?))) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![0.0; dim]
                }
            },
            a,
            b,
            &knots,
            &self.rule,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    fn homogeneous_parts(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        self.problem.check_time(t)?;
        let history = self.problem.history();
        let ev = &self.evaluator;
        let tau = self.tau();
        // fail early on C1 data before evaluating anything else
        history.deriv2(-2.0 * tau)?;
        let mut x = ev.fundamental_x1_derivative(t + tau, order)?.apply(&history.value(-2.0 * tau)?);
        let b = ev.fundamental_x2_derivative(t + 2.0 * tau, order)?.apply(&history.deriv1(-2.0 * tau)?);
        axpy(1.0, &b, &mut x);
        let integral = self.convolve(
            |sigma| ev.fundamental_x2_derivative(sigma, order),
            |s| history.deriv2(s),
            t,
            -2.0 * tau,
            0.0,
            &history.knots(),
        )?;
        axpy(1.0, &integral, &mut x);
        Ok(x)
    }

    /// Solution of the problem with `f ≡ 0` (the forcing is ignored).
    pub fn solve_homogeneous(&self, t: f64) -> Result<Vec<f64>> {
        self.homogeneous_parts(t, 0)
    }

    fn forced_parts(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        self.problem.check_time(t)?;
        let forcing = self.problem.forcing();
        if t <= 0.0 || forcing.is_zero() {
            return Ok(vec![0.0; self.problem.dim()]);
        }
        let ev = &self.evaluator;
        self.convolve(|sigma| ev.fundamental_x2_derivative(sigma, order), |s| Ok(forcing.eval(s)), t, 0.0, t, forcing.kinks())
    }

    /// Solution of the problem with `φ ≡ 0` (the history is ignored); zero for `t ≤ 0`.
    pub fn solve_forced_zero_ic(&self, t: f64) -> Result<Vec<f64>> {
        self.forced_parts(t, 0)
    }

    /// Classical representation; needs a `C²` history.
    pub fn solve_classical(&self, t: f64) -> Result<Vec<f64>> {
        let mut x = self.solve_homogeneous(t)?;
        axpy(1.0, &self.solve_forced_zero_ic(t)?, &mut x);
        Ok(x)
    }

    /// Time derivative of the classical representation.
    pub fn classical_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let mut v = self.homogeneous_parts(t, 1)?;
        axpy(1.0, &self.forced_parts(t, 1)?, &mut v);
        Ok(v)
    }

    /// Mild representation; needs only `φ ∈ C¹`.
    pub fn solve_mild(&self, t: f64) -> Result<Vec<f64>> {
        self.problem.check_time(t)?;
        let history = self.problem.history();
        let ev = &self.evaluator;
        let tau = self.tau();
        let mut x = ev.fundamental_x1(t + tau)?.apply(&history.value(-2.0 * tau)?);
        let (anchor, sign) = match self.mild_form {
            MildForm::Derived => (t, 1.0),
            MildForm::Printed => (t + 2.0 * tau, -1.0),
        };
        axpy(1.0, &ev.fundamental_x2(anchor)?.apply(&history.deriv1(0.0)?), &mut x);
        let integral = self.convolve(
            |sigma| ev.fundamental_x2_derivative(sigma, 1),
            |s| history.deriv1(s),
            t,
            -2.0 * tau,
            0.0,
            &history.knots(),
        )?;
        axpy(sign, &integral, &mut x);
        axpy(1.0, &self.forced_parts(t, 0)?, &mut x);
        Ok(x)
    }

    /// Time derivative of the mild representation.
    ///
    /// `ẋ²_τ` jumps by the identity at 0, so for `t ≤ 0` differentiating under
    /// the integral picks up the point mass `±φ̇(t)`.
    pub fn mild_derivative(&self, t: f64) -> Result<Vec<f64>> {
        self.problem.check_time(t)?;
        let history = self.problem.history();
        let ev = &self.evaluator;
        let tau = self.tau();
        let mut v = ev.fundamental_x1_derivative(t + tau, 1)?.apply(&history.value(-2.0 * tau)?);
        let (anchor, sign) = match self.mild_form {
            MildForm::Derived => (t, 1.0),
            MildForm::Printed => (t + 2.0 * tau, -1.0),
        };
        axpy(1.0, &ev.fundamental_x2_derivative(anchor, 1)?.apply(&history.deriv1(0.0)?), &mut v);
        let integral = self.convolve(
            |sigma| ev.fundamental_x2_derivative(sigma, 2),
            |s| history.deriv1(s),
            t,
            -2.0 * tau,
            0.0,
            &history.knots(),
        )?;
        axpy(sign, &integral, &mut v);
        if t < 0.0 {
            axpy(sign, &history.deriv1(t)?, &mut v);
        }
        axpy(1.0, &self.forced_parts(t, 1)?, &mut v);
        Ok(v)
    }

    pub fn trajectory(&self, representation: Representation) -> Trajectory<'_> {
        Trajectory { solver: self, representation }
    }
}

/// A solution path on `[−2τ, T]` with value and first-derivative queries.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory<'a> {
    solver: &'a DelaySolver,
    representation: Representation,
}

impl Trajectory<'_> {
    pub fn problem(&self) -> &DelayProblem {
        self.solver.problem()
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        match self.representation {
            Representation::Classical => self.solver.solve_classical(t),
            Representation::Mild => self.solver.solve_mild(t),
        }
    }

    pub fn deriv(&self, t: f64) -> Result<Vec<f64>> {
        match self.representation {
            Representation::Classical => self.solver.classical_derivative(t),
            Representation::Mild => self.solver.mild_derivative(t),
        }
    }

    /// Multiples of `τ` in `[−2τ, T]`; every multiple of `2τ` is among them.
    pub fn segment_knots(&self) -> Vec<f64> {
        let p = self.problem();
        self.solver.evaluator().knots_in(-2.0 * p.tau(), p.horizon())
    }
}
