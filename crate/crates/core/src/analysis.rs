//! Error bounds for `τ → 0` and empirical checks of them.
//!
//! ```text
//!     α    = 1 + ‖Ω‖ e^{τ₀‖Ω‖}
//!     β    = 2(1 + ‖Ω‖)(1 + ‖Ω⁻¹‖) e^{α(T+2τ)‖Ω‖}
//!     δ    = ‖Ω‖²(2 + ‖Ω⁻¹‖ + ‖Ω⁻¹‖T) e^{‖Ω‖T}
//! ```
//!
//! Sup norms are taken over a uniform grid together with every multiple of
//! `τ` inside the interval, so they are grid sups rather than true sups.

use std::sync::Arc;

use rayon::prelude::*;

use crate::classical::ClassicalProblem;
use crate::dexp::{DelayedExpEvaluator, Sign};
use crate::error::{Error, Result};
use crate::linalg::{distance, matrix_exp, norm2, operator_norm, Operator};
use crate::problem::{DelayProblem, HistoryFunction, Smoothness};
use crate::quadrature::QuadratureRule;
use crate::solver::{DelaySolver, MildForm, Representation};
use crate::steps::{self, integrate_segments_with_rule};

/// Errors below this are treated as exact zeros when fitting slopes.
pub const ZERO_ERROR: f64 = 1e-13;

/// Smallest grid accepted by the lemma checks.
pub const MIN_LEMMA_GRID: usize = 16;

/// Default number of uniform grid points for sup norms.
pub const DEFAULT_GRID: usize = 512;

pub fn alpha(omega_norm: f64, tau0: f64) -> f64 {
    1.0 + omega_norm * (tau0 * omega_norm).exp()
}

pub fn beta(omega_norm: f64, inverse_norm: f64, alpha: f64, horizon: f64, tau: f64) -> f64 {
    2.0 * (1.0 + omega_norm) * (1.0 + inverse_norm) * (alpha * (horizon + 2.0 * tau) * omega_norm).exp()
}

pub fn delta(omega_norm: f64, inverse_norm: f64, horizon: f64) -> f64 {
    omega_norm * omega_norm * (2.0 + inverse_norm + inverse_norm * horizon) * (omega_norm * horizon).exp()
}

/// `c·x`, except that a zero `x` stays zero even for an infinite `c`.
fn scaled(c: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        c * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsConstants {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub kappa: f64,
    pub tau: f64,
    pub tau0: f64,
    pub horizon: f64,
    pub omega_norm: f64,
    pub inverse_norm: f64,
}

impl BoundsConstants {
    /// Constants for an invertible `Ω`.
    pub fn new(omega: &Operator, tau: f64, tau0: f64, horizon: f64) -> Result<Self> {
        let inverse_norm = omega.inverse_norm()?;
        Self::build(omega.norm(), inverse_norm, tau, tau0, horizon)
    }

    /// As [`BoundsConstants::new`], but a singular `Ω` gives `‖Ω⁻¹‖ = ∞`
    /// and hence infinite `β` and `δ`.
    pub fn allowing_singular(omega: &Operator, tau: f64, tau0: f64, horizon: f64) -> Result<Self> {
        let inverse_norm = match omega.inverse_norm() {
            Ok(v) => v,
            Err(Error::SingularOperator { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Self::build(omega.norm(), inverse_norm, tau, tau0, horizon)
    }

    fn build(omega_norm: f64, inverse_norm: f64, tau: f64, tau0: f64, horizon: f64) -> Result<Self> {
        check_taus(tau, tau0)?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let a = alpha(omega_norm, tau0);
        let (b, d) = if inverse_norm.is_finite() {
            (beta(omega_norm, inverse_norm, a, horizon, tau), delta(omega_norm, inverse_norm, horizon))
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        Ok(Self {
            alpha: a,
            beta: b,
            delta: d,
            kappa: steps::kappa(omega_norm, tau),
            tau,
            tau0,
            horizon,
            omega_norm,
            inverse_norm,
        })
    }

    /// `τ e^{αT‖Ω‖}`.
    pub fn lemma_bound(&self) -> f64 {
        self.tau * (self.alpha * self.horizon * self.omega_norm).exp()
    }

    /// `(γ + τ)(1 + ‖Ω‖) e^{α(T + γ + τ)‖Ω‖}`.
    pub fn corollary_bound(&self, gamma: f64) -> f64 {
        (gamma + self.tau)
            * (1.0 + self.omega_norm)
            * (self.alpha * (self.horizon + gamma + self.tau) * self.omega_norm).exp()
    }
}

fn check_taus(tau: f64, tau0: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::InvalidParameter(format!("tau0 must be positive, got {tau0}")));
    }
    if tau > tau0 {
        return Err(Error::DomainError(format!("tau = {tau} exceeds tau0 = {tau0}")));
    }
    Ok(())
}

/// Uniform points of `[a, b]` merged with the multiples of `tau` inside it.
pub fn sup_grid(a: f64, b: f64, points: usize, tau: f64) -> Vec<f64> {
    let points = points.max(2);
    let mut grid: Vec<f64> = (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect();
    let first = (a / tau).ceil() as i64;
    let last = (b / tau).floor() as i64;
    grid.extend((first..=last).map(|k| k as f64 * tau).filter(|t| *t > a && *t < b));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Result of a lemma or corollary check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaRow {
    pub tau: f64,
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub observed: f64,
    pub bound: f64,
    pub satisfied: bool,
}

fn max_gap(omega: &Operator, tau: f64, shift: f64, horizon: f64, grid: usize) -> Result<f64> {
    let ev = DelayedExpEvaluator::new(omega.clone(), tau)?;
    let mut worst = 0.0_f64;
    for t in sup_grid(0.0, horizon, grid, tau) {
        let diff = &ev.delayed_exp(t + shift, Sign::Plus)? - &matrix_exp(omega, t)?;
        worst = worst.max(operator_norm(&diff));
    }
    Ok(worst)
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < MIN_LEMMA_GRID {
        return Err(Error::InvalidParameter(format!("grid must have at least {MIN_LEMMA_GRID} points, got {grid}")));
    }
    Ok(())
}

/// `max_t ‖exp_τ(t − τ; Ω) − e^{Ωt}‖` over `[0, T]` against `τ e^{αT‖Ω‖}`.
pub fn lemma_check(omega: &Operator, tau: f64, tau0: f64, horizon: f64, grid: usize) -> Result<LemmaRow> {
    check_grid(grid)?;
    let c = BoundsConstants::allowing_singular(omega, tau, tau0, horizon)?;
    let observed = max_gap(omega, tau, -tau, horizon, grid)?;
    let bound = c.lemma_bound();
    Ok(LemmaRow { tau, gamma: None, alpha: c.alpha, observed, bound, satisfied: observed <= bound })
}

/// `max_t ‖exp_τ(t + γ; Ω) − e^{Ωt}‖` against `(γ + τ)(1 + ‖Ω‖)e^{α(T+γ+τ)‖Ω‖}`.
pub fn corollary_check(omega: &Operator, tau: f64, tau0: f64, gamma: f64, horizon: f64, grid: usize) -> Result<LemmaRow> {
    check_grid(grid)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::DomainError(format!("gamma must be nonnegative, got {gamma}")));
    }
    let c = BoundsConstants::allowing_singular(omega, tau, tau0, horizon)?;
    let observed = max_gap(omega, tau, gamma, horizon, grid)?;
    let bound = c.corollary_bound(gamma);
    Ok(LemmaRow { tau, gamma: Some(gamma), alpha: c.alpha, observed, bound, satisfied: observed <= bound })
}

/// How the history `φ(·; τ)` is built for each `τ` of a study.
#[derive(Clone, Default)]
pub enum HistoryFamily {
    /// `φ(t) = x₀ + t·x₁`.
    #[default]
    LinearConsistent,
    /// Any rule producing a history for the given `τ`.
    Custom(Arc<dyn Fn(f64) -> Result<HistoryFunction> + Send + Sync>),
}

impl std::fmt::Debug for HistoryFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LinearConsistent => f.write_str("LinearConsistent"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl HistoryFamily {
    pub fn build(&self, base: &ClassicalProblem, tau: f64) -> Result<HistoryFunction> {
        match self {
            Self::LinearConsistent => HistoryFunction::linear(tau, base.x0().to_vec(), base.x1().to_vec()),
            Self::Custom(rule) => rule(tau),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudySettings {
    pub tau0: f64,
    pub grid: usize,
    pub rule: QuadratureRule,
    pub mild_form: MildForm,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self { tau0: 1.0, grid: DEFAULT_GRID, rule: QuadratureRule::default(), mild_form: MildForm::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub c0_error: f64,
    pub c1_error: f64,
    pub c0_bound: f64,
    pub c1_bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Fitted(f64),
    /// Every error was below [`ZERO_ERROR`].
    ExactAgreement,
}

impl Slope {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Fitted(v) => Some(*v),
            Self::ExactAgreement => None,
        }
    }
}

impl std::fmt::Display for Slope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fitted(v) => write!(f, "{v:.16e}"),
            Self::ExactAgreement => f.write_str("ExactAgreement"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub fitted_slope: Slope,
    /// `None` when fewer than two `C¹` errors are nonzero.
    pub c1_slope: Option<Slope>,
}

impl ConvergenceTable {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }
}

/// Least-squares slope of `ln e` against `ln τ`, skipping errors below [`ZERO_ERROR`].
pub fn fit_slope(taus: &[f64], errors: &[f64]) -> Result<Slope> {
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e >= ZERO_ERROR)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.is_empty() {
        return Ok(Slope::ExactAgreement);
    }
    if pts.len() < 2 {
        return Err(Error::SlopeUndefined(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::SlopeUndefined(pts.len()));
    }
    Ok(Slope::Fitted(sxy / sxx))
}

/// Compares the delay solution `x(·; τ)` with the classical solution `x̄` for each `τ`.
///
/// Rows come out in decreasing `τ`. Errors are grid sups over `[0, T]`; the
/// `C¹` error is `max(sup‖x − x̄‖, sup‖ẋ − x̄'‖)`.
pub fn solution_convergence_study(
    base: &ClassicalProblem,
    taus: &[f64],
    family: &HistoryFamily,
    settings: &StudySettings,
) -> Result<ConvergenceTable> {
    if taus.len() < 3 {
        return Err(Error::SlopeUndefined(taus.len()));
    }
    let mut taus = taus.to_vec();
    taus.sort_by(|a, b| b.total_cmp(a));
    for &tau in &taus {
        check_taus(tau, settings.tau0)?;
    }
    let horizon = base.horizon();
    let f_l1 = base.forcing().l1_norm(0.0, horizon, &settings.rule)?;
    let x0n = norm2(base.x0());
    let x1n = norm2(base.x1());

    let rows = taus
        .par_iter()
        .map(|&tau| {
            let history = family.build(base, tau)?;
            let problem = DelayProblem::new(base.omega().clone(), tau, history.clone(), base.forcing().clone(), horizon)?;
            let solver = DelaySolver::with_rule(problem, settings.rule.clone())?.with_mild_form(settings.mild_form);
            let rep = if history.smoothness() == Smoothness::C2 { Representation::Classical } else { Representation::Mild };
            let path = solver.trajectory(rep);

            let mut c0 = 0.0_f64;
            let mut c1 = 0.0_f64;
            for t in sup_grid(0.0, horizon, settings.grid, tau) {
                let (xbar, vbar) = base.state(t, &settings.rule)?;
                c0 = c0.max(distance(&path.value(t)?, &xbar));
                c1 = c1.max(distance(&path.deriv(t)?, &vbar));
            }
            c1 = c1.max(c0);

            let c = BoundsConstants::allowing_singular(base.omega(), tau, settings.tau0, horizon)?;
            let ic_gap = distance(&history.value(-2.0 * tau)?, base.x0()) + distance(&history.deriv1(0.0)?, base.x1());
            let phi = history.c1_norm(settings.grid)?;
            let c0_bound = scaled(3.0 * c.beta, ic_gap) + scaled(3.0 * c.beta * tau, phi + f_l1);
            let c1_factor = 3.0 * (1.0 + c.beta) * (1.0 + c.delta) * (1.0 + horizon);
            let c1_bound = scaled(c1_factor, ic_gap + tau * (phi + f_l1 + x0n + x1n));
            Ok(ConvergenceRow {
                tau,
                c0_error: c0,
                c1_error: c1,
                c0_bound,
                c1_bound,
                satisfied: c0 <= c0_bound && c1 <= c1_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ts: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let fitted_slope = fit_slope(&ts, &rows.iter().map(|r| r.c0_error).collect::<Vec<_>>())?;
    let c1_slope = fit_slope(&ts, &rows.iter().map(|r| r.c1_error).collect::<Vec<_>>()).ok();
    Ok(ConvergenceTable { rows, fitted_slope, c1_slope })
}

/// Which check produced a [`BoundsRow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Lemma,
    Corollary,
    Apriori,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lemma => "lemma",
            Self::Corollary => "corollary",
            Self::Apriori => "apriori",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsRow {
    pub check: CheckKind,
    pub tau: f64,
    /// `γ` for corollary rows, the segment index for a priori rows, 0 otherwise.
    pub param: f64,
    pub observed: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub constants: BoundsConstants,
    pub rows: Vec<BoundsRow>,
}

impl BoundsReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }
}

/// Lemma, corollary (`γ ∈ {0, τ, 2τ}`) and a priori checks for one problem.
///
/// The step oracle runs `⌊T/2τ⌋` segments with `cells` grid cells each.
pub fn bounds_report(p: &DelayProblem, tau0: f64, grid: usize, cells: usize, rule: &QuadratureRule) -> Result<BoundsReport> {
    let (omega, tau, horizon) = (p.omega(), p.tau(), p.horizon());
    let constants = BoundsConstants::allowing_singular(omega, tau, tau0, horizon)?;
    let mut rows = Vec::new();
    let lemma = lemma_check(omega, tau, tau0, horizon, grid)?;
    rows.push(BoundsRow {
        check: CheckKind::Lemma,
        tau,
        param: 0.0,
        observed: lemma.observed,
        bound: lemma.bound,
        satisfied: lemma.satisfied,
    });
    for gamma in [0.0, tau, 2.0 * tau] {
        let row = corollary_check(omega, tau, tau0, gamma, horizon, grid)?;
        rows.push(BoundsRow {
            check: CheckKind::Corollary,
            tau,
            param: gamma,
            observed: row.observed,
            bound: row.bound,
            satisfied: row.satisfied,
        });
    }
    let n = ((horizon / (2.0 * tau)) * (1.0 + 1e-12)).floor() as usize;
    if n >= 1 {
        let segments = integrate_segments_with_rule(p, n, 2.0 * tau / cells.max(1) as f64, rule)?;
        let report = steps::apriori_check_with_rule(p, &segments, rule)?;
        rows.extend(report.per_segment.iter().map(|s| BoundsRow {
            check: CheckKind::Apriori,
            tau,
            param: s.n as f64,
            observed: s.observed,
            bound: s.bound,
            satisfied: s.satisfied,
        }));
    }
    Ok(BoundsReport { constants, rows })
}
