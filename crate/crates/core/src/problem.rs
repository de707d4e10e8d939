//! Data of the delay Cauchy problem `ẍ(t) − Ω² x(t − 2τ) = f(t)`, `x = φ` on `[−2τ, 0]`.

use std::fmt;
use std::sync::Arc;

use crate::dexp::MAX_KNOTS;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Operator};
use crate::quadrature::{integrate_scalar, QuadratureRule};

/// A vector-valued function of time shared across threads.
pub type VectorFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Relative slack on the edges of `[−2τ, 0]` and `[0, T]`.
const DOMAIN_SLACK: f64 = 1e-12;

/// Minimum number of samples of a sampled history.
pub const MIN_HISTORY_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Smoothness {
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    C0,
    L1,
}

#[derive(Clone)]
enum HistoryKind {
    Analytic { value: VectorFn, deriv1: VectorFn, deriv2: Option<VectorFn> },
    Sampled { step: f64, values: Vec<Vec<f64>>, derivs: Vec<Vec<f64>> },
}

/// Initial function `φ` on `[−2τ, 0]`.
#[derive(Clone)]
pub struct HistoryFunction {
    tau: f64,
    dim: usize,
    smoothness: Smoothness,
    kind: HistoryKind,
}

impl fmt::Debug for HistoryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            HistoryKind::Analytic { .. } => "analytic".to_string(),
            HistoryKind::Sampled { values, .. } => format!("sampled({} points)", values.len()),
        };
        f.debug_struct("HistoryFunction")
            .field("tau", &self.tau)
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness)
            .field("kind", &kind)
            .finish()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tau must be positive and finite, got {tau}")))
    }
}

impl HistoryFunction {
    /// A `C²` history given by closed-form value and first two derivatives.
    pub fn analytic(tau: f64, dim: usize, value: VectorFn, deriv1: VectorFn, deriv2: VectorFn) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self {
            tau,
            dim,
            smoothness: Smoothness::C2,
            kind: HistoryKind::Analytic { value, deriv1, deriv2: Some(deriv2) },
        })
    }

    /// A `C¹` history; the classical representation is unavailable for it.
    pub fn analytic_c1(tau: f64, dim: usize, value: VectorFn, deriv1: VectorFn) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { tau, dim, smoothness: Smoothness::C1, kind: HistoryKind::Analytic { value, deriv1, deriv2: None } })
    }

    /// The constant history `φ ≡ c`.
    pub fn constant(tau: f64, c: Vec<f64>) -> Result<Self> {
        let dim = c.len();
        let zero = vec![0.0; dim];
        let z1 = zero.clone();
        Self::analytic(tau, dim, Arc::new(move |_| c.clone()), Arc::new(move |_| zero.clone()), Arc::new(move |_| z1.clone()))
    }

    /// The affine history `φ(t) = a + t·b`.
    pub fn linear(tau: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        let dim = a.len();
        let slope = b.clone();
        let zero = vec![0.0; dim];
        Self::analytic(
            tau,
            dim,
            Arc::new(move |t| a.iter().zip(&b).map(|(ai, bi)| ai + t * bi).collect()),
            Arc::new(move |_| slope.clone()),
            Arc::new(move |_| zero.clone()),
        )
    }

    /// Samples `(φ, φ̇)` on the uniform grid `−2τ + i·h`, interpolated by
    /// cubic Hermite splines. With `Smoothness::C2` the interpolant's piecewise
    /// second derivative serves as `φ̈`.
    pub fn sampled(tau: f64, values: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>, smoothness: Smoothness) -> Result<Self> {
        check_tau(tau)?;
        let count = values.len();
        if count < MIN_HISTORY_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "sampled history needs at least {MIN_HISTORY_SAMPLES} points, got {count}"
            )));
        }
        if derivs.len() != count {
            return Err(Error::DimensionMismatch { expected: count, got: derivs.len() });
        }
        let step = 2.0 * tau / (count - 1) as f64;
        if step > 0.5 * tau * (1.0 + DOMAIN_SLACK) {
            return Err(Error::InvalidParameter(format!("sample spacing {step} exceeds tau/2")));
        }
        let dim = values[0].len();
        for row in values.iter().chain(&derivs) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("history sample".into()));
            }
        }
        Ok(Self { tau, dim, smoothness, kind: HistoryKind::Sampled { step, values, derivs } })
    }

    /// Samples an analytic history onto `count` uniform points.
    pub fn resample(&self, count: usize, smoothness: Smoothness) -> Result<Self> {
        let step = 2.0 * self.tau / (count.max(2) - 1) as f64;
        let grid: Vec<f64> = (0..count).map(|i| -2.0 * self.tau + step * i as f64).collect();
        let values = grid.iter().map(|&t| self.value(t)).collect::<Result<_>>()?;
        let derivs = grid.iter().map(|&t| self.deriv1(t)).collect::<Result<_>>()?;
        Self::sampled(self.tau, values, derivs, smoothness)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, HistoryKind::Sampled { .. })
    }

    /// Interior points where `φ̈` may jump.
    pub fn knots(&self) -> Vec<f64> {
        match &self.kind {
            HistoryKind::Analytic { .. } => Vec::new(),
            HistoryKind::Sampled { step, values, .. } => {
                (1..values.len() - 1).map(|i| -2.0 * self.tau + step * i as f64).collect()
            }
        }
    }

    fn clamp(&self, t: f64) -> Result<f64> {
        let lo = -2.0 * self.tau;
        let slack = DOMAIN_SLACK * self.tau;
        if !t.is_finite() || t < lo - slack || t > slack {
            return Err(Error::DomainError(format!("history queried at t = {t}, outside [{lo}, 0]")));
        }
        Ok(t.clamp(lo, 0.0))
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.clamp(t)?;
        Ok(match &self.kind {
            HistoryKind::Analytic { value, .. } => value(t),
            HistoryKind::Sampled { .. } => self.hermite(t, 0),
        })
    }

    pub fn deriv1(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.clamp(t)?;
        Ok(match &self.kind {
            HistoryKind::Analytic { deriv1, .. } => deriv1(t),
            HistoryKind::Sampled { .. } => self.hermite(t, 1),
        })
    }

    pub fn deriv2(&self, t: f64) -> Result<Vec<f64>> {
        if self.smoothness < Smoothness::C2 {
            return Err(Error::SmoothnessError("history is only C1; its second derivative is unavailable".into()));
        }
        let t = self.clamp(t)?;
        Ok(match &self.kind {
            HistoryKind::Analytic { deriv2, .. } => deriv2.as_ref().expect("C2 history carries deriv2")(t),
            HistoryKind::Sampled { .. } => self.hermite(t, 2),
        })
    }

    /// `max(sup ‖φ‖, sup ‖φ̇‖)` over `points` uniform samples of `[−2τ, 0]`.
    pub fn c1_norm(&self, points: usize) -> Result<f64> {
        let points = points.max(2);
        let step = 2.0 * self.tau / (points - 1) as f64;
        let mut sup = 0.0_f64;
        for i in 0..points {
            let t = -2.0 * self.tau + step * i as f64;
            sup = sup.max(norm2(&self.value(t)?)).max(norm2(&self.deriv1(t)?));
        }
        Ok(sup)
    }

    fn hermite(&self, t: f64, order: usize) -> Vec<f64> {
        let HistoryKind::Sampled { step, values, derivs } = &self.kind else {
            unreachable!("hermite on analytic history")
        };
        let h = *step;
        let last = values.len() - 2;
        let i = (((t + 2.0 * self.tau) / h).floor().max(0.0) as usize).min(last);
        let s = ((t + 2.0 * self.tau) - h * i as f64) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (b00, b10, b01, b11, scale) = match order {
            0 => (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2, 1.0),
            1 => (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s, 1.0 / h),
            _ => (12.0 * s - 6.0, 6.0 * s - 4.0, -12.0 * s + 6.0, 6.0 * s - 2.0, 1.0 / (h * h)),
        };
        (0..self.dim)
            .map(|k| {
                scale
                    * (b00 * values[i][k]
                        + h * b10 * derivs[i][k]
                        + b01 * values[i + 1][k]
                        + h * b11 * derivs[i + 1][k])
            })
            .collect()
    }
}

/// Right-hand side `f` on `[0, T]`.
#[derive(Clone)]
pub struct ForcingFunction {
    dim: usize,
    f: VectorFn,
    kinks: Vec<f64>,
    continuity: Continuity,
    identically_zero: bool,
}

impl fmt::Debug for ForcingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForcingFunction")
            .field("dim", &self.dim)
            .field("kinks", &self.kinks)
            .field("continuity", &self.continuity)
            .field("identically_zero", &self.identically_zero)
            .finish()
    }
}

impl ForcingFunction {
    pub fn new(dim: usize, f: VectorFn, mut kinks: Vec<f64>, continuity: Continuity) -> Result<Self> {
        if kinks.iter().any(|k| !k.is_finite()) {
            return Err(Error::NonFiniteInput("forcing kink time".into()));
        }
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        Ok(Self { dim, f, kinks, continuity, identically_zero: false })
    }

    pub fn zero(dim: usize) -> Self {
        let z = vec![0.0; dim];
        Self { dim, f: Arc::new(move |_| z.clone()), kinks: Vec::new(), continuity: Continuity::C0, identically_zero: true }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let dim = value.len();
        let zero = value.iter().all(|v| *v == 0.0);
        Self { dim, f: Arc::new(move |_| value.clone()), kinks: Vec::new(), continuity: Continuity::C0, identically_zero: zero }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// True when `f ≡ 0` is known structurally; integrals against it are skipped.
    pub fn is_zero(&self) -> bool {
        self.identically_zero
    }

    /// `∫_a^b ‖f(s)‖ ds`.
    pub fn l1_norm(&self, a: f64, b: f64, rule: &QuadratureRule) -> Result<f64> {
        if self.identically_zero || b <= a {
            return Ok(0.0);
        }
        integrate_scalar(|s| norm2(&self.eval(s)), a, b, &self.kinks, rule)
    }
}

/// The full Cauchy problem with delay `2τ` on the horizon `[0, T]`.
#[derive(Debug, Clone)]
pub struct DelayProblem {
    omega: Operator,
    tau: f64,
    history: HistoryFunction,
    forcing: ForcingFunction,
    horizon: f64,
}

impl DelayProblem {
    /// Largest horizon, in units of `τ`, for which every representation
    /// argument (which reaches `T + 2τ`) stays within the evaluator's range.
    pub const MAX_HORIZON_TAUS: usize = MAX_KNOTS - 2;

    pub fn new(omega: Operator, tau: f64, history: HistoryFunction, forcing: ForcingFunction, horizon: f64) -> Result<Self> {
        check_tau(tau)?;
        if !omega.is_finite() {
            return Err(Error::NonFiniteInput("omega has non-finite entries".into()));
        }
        if (history.tau() - tau).abs() > DOMAIN_SLACK * tau {
            return Err(Error::InvalidParameter(format!(
                "history is defined for tau = {}, problem uses tau = {tau}",
                history.tau()
            )));
        }
        let dim = omega.dim();
        for got in [history.dim(), forcing.dim()] {
            if got != dim {
                return Err(Error::DimensionMismatch { expected: dim, got });
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if horizon > Self::MAX_HORIZON_TAUS as f64 * tau * (1.0 + DOMAIN_SLACK) {
            return Err(Error::ExcessiveHorizon { t: horizon, tau, max_knots: Self::MAX_HORIZON_TAUS });
        }
        if let Some(k) = forcing.kinks().iter().find(|&&k| k < 0.0 || k > horizon) {
            return Err(Error::DomainError(format!("forcing kink {k} outside [0, {horizon}]")));
        }
        Ok(Self { omega, tau, history, forcing, horizon })
    }

    pub fn omega(&self) -> &Operator {
        &self.omega
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn history(&self) -> &HistoryFunction {
        &self.history
    }

    pub fn forcing(&self) -> &ForcingFunction {
        &self.forcing
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// Checks `t ∈ [−2τ, T]`.
    pub fn check_time(&self, t: f64) -> Result<()> {
        let slack = DOMAIN_SLACK * self.tau.max(self.horizon);
        if t.is_finite() && t >= -2.0 * self.tau - slack && t <= self.horizon + slack {
            Ok(())
        } else {
            Err(Error::DomainError(format!("t = {t} outside [{}, {}]", -2.0 * self.tau, self.horizon)))
        }
    }
}
