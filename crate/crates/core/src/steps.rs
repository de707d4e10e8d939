//! Method of steps on segments of length `2τ`.
//!
//! With `x_n(s) = x(2nτ + s)`, `s ∈ [−2τ, 0]`, and `x_0 = φ`, the velocity form
//! of the equation reads
//!
//! ```text
//!     ẋ_n(s) = ẋ_{n−1}(0) + Ω² ∫_{−2τ}^s x_{n−1}(σ) dσ + ∫_{2(n−1)τ}^{2nτ+s} f(σ) dσ
//!     x_n(s) = x_{n−1}(0) + ∫_{−2τ}^s ẋ_n(σ) dσ
//! ```
//!
//! Both integrals run over the stored grid. Each cell uses the trapezoid rule
//! with the endpoint-derivative correction `h²/12 (g'(a) − g'(b))`, which is
//! fourth order and needs nothing beyond the grid values of `x` and `ẋ`. The
//! forcing integral is done per cell with Gauss-Legendre, split at the kinks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2, Operator};
use crate::problem::{DelayProblem, ForcingFunction};
use crate::quadrature::{integrate, QuadratureRule};

/// Grid cells per segment used when no step is given.
pub const DEFAULT_CELLS_PER_SEGMENT: usize = 512;

/// One segment `x_n` sampled on `s_i = −2τ + i·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    pub index: usize,
    pub step: f64,
    pub s: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub dx: Vec<Vec<f64>>,
}

impl SegmentSolution {
    /// `max(max_i ‖x(s_i)‖, max_i ‖ẋ(s_i)‖)`.
    pub fn c1_norm(&self) -> f64 {
        self.x.iter().chain(&self.dx).map(|v| norm2(v)).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

fn cells_for(tau: f64, h: f64) -> Result<usize> {
    let segment = 2.0 * tau;
    if !(h.is_finite() && h > 0.0) || h > segment {
        return Err(Error::GridMismatch { h, segment });
    }
    let ratio = segment / h;
    let cells = ratio.round();
    if (ratio - cells).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch { h, segment });
    }
    Ok(cells as usize)
}

/// Runs the step recursion for `n_segments` segments with grid step `h`.
///
/// The returned vector starts with the history segment `x_0 = φ`.
pub fn integrate_segments(p: &DelayProblem, n_segments: usize, h: f64) -> Result<Vec<SegmentSolution>> {
    integrate_segments_with_rule(p, n_segments, h, &QuadratureRule::default())
}

pub fn integrate_segments_with_rule(
    p: &DelayProblem,
    n_segments: usize,
    h: f64,
    rule: &QuadratureRule,
) -> Result<Vec<SegmentSolution>> {
    let tau = p.tau();
    let cells = cells_for(tau, h)?;
    if n_segments == 0 {
        return Err(Error::InvalidParameter("n_segments must be positive".into()));
    }
    let reach = 2.0 * tau * n_segments as f64;
    if reach > p.horizon() * (1.0 + 1e-12) {
        return Err(Error::OutOfHorizon { t: reach, horizon: p.horizon() });
    }
    let h = 2.0 * tau / cells as f64;
    let s: Vec<f64> = (0..=cells).map(|i| -2.0 * tau + h * i as f64).collect();
    let history = p.history();
    let x0 = s.iter().map(|&t| history.value(t)).collect::<Result<Vec<_>>>()?;
    let dx0 = s.iter().map(|&t| history.deriv1(t)).collect::<Result<Vec<_>>>()?;
    let mut segments = vec![SegmentSolution { index: 0, step: h, s: s.clone(), x: x0, dx: dx0 }];

    let omega_sq = p.omega() * p.omega();
    for n in 1..=n_segments {
        let prev = segments.last().expect("history segment present");
        let next = advance(p, &omega_sq, prev, n, rule)?;
        segments.push(next);
    }
    Ok(segments)
}

fn advance(p: &DelayProblem, omega_sq: &Operator, prev: &SegmentSolution, n: usize, rule: &QuadratureRule) -> Result<SegmentSolution> {
    let dim = p.dim();
    let h = prev.step;
    let cells = prev.len() - 1;
    let offset = 2.0 * p.tau() * n as f64;
    let forcing = p.forcing();

    // forcing increments per cell, independent of each other
    let f_cells: Vec<Vec<f64>> = if forcing.is_zero() {
        vec![vec![0.0; dim]; cells]
    } else {
        (0..cells)
            .into_par_iter()
            .map(|i| integrate(|t| forcing.eval(t), offset + prev.s[i], offset + prev.s[i + 1], forcing.kinks(), rule))
            .collect::<Result<_>>()?
    };
    let f_grid: Vec<Vec<f64>> = if forcing.is_zero() {
        vec![vec![0.0; dim]; cells + 1]
    } else {
        prev.s.iter().map(|&s| forcing.eval(offset + s)).collect()
    };

    let mut dx = Vec::with_capacity(cells + 1);
    let mut acc = prev.dx[cells].clone();
    dx.push(acc.clone());
    for (i, f_cell) in f_cells.iter().enumerate() {
        // ∫ x_{n−1} over the cell, corrected trapezoid
        let mut cell = vec![0.0; dim];
        axpy(0.5 * h, &prev.x[i], &mut cell);
        axpy(0.5 * h, &prev.x[i + 1], &mut cell);
        axpy(h * h / 12.0, &prev.dx[i], &mut cell);
        axpy(-h * h / 12.0, &prev.dx[i + 1], &mut cell);
        axpy(1.0, &omega_sq.apply(&cell), &mut acc);
        axpy(1.0, f_cell, &mut acc);
        dx.push(acc.clone());
    }

    let ddx: Vec<Vec<f64>> = prev
        .x
        .iter()
        .zip(&f_grid)
        .map(|(x, f)| {
            let mut a = omega_sq.apply(x);
            axpy(1.0, f, &mut a);
            a
        })
        .collect();

    let mut x = Vec::with_capacity(cells + 1);
    let mut pos = prev.x[cells].clone();
    x.push(pos.clone());
    for i in 0..cells {
        axpy(0.5 * h, &dx[i], &mut pos);
        axpy(0.5 * h, &dx[i + 1], &mut pos);
        axpy(h * h / 12.0, &ddx[i], &mut pos);
        axpy(-h * h / 12.0, &ddx[i + 1], &mut pos);
        x.push(pos.clone());
    }
    if x.iter().chain(&dx).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(offset));
    }
    Ok(SegmentSolution { index: n, step: h, s: prev.s.clone(), x, dx })
}

/// A stitched step solution with queries between grid points.
#[derive(Debug, Clone)]
pub struct StepSolution {
    tau: f64,
    omega_sq: Operator,
    forcing: ForcingFunction,
    segments: Vec<SegmentSolution>,
}

impl StepSolution {
    pub fn new(p: &DelayProblem, segments: Vec<SegmentSolution>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("no segments".into()));
        }
        Ok(Self { tau: p.tau(), omega_sq: p.omega() * p.omega(), forcing: p.forcing().clone(), segments })
    }

    /// Integrates as many whole segments as fit in the horizon.
    pub fn solve(p: &DelayProblem, h: f64) -> Result<Self> {
        let n = ((p.horizon() / (2.0 * p.tau())) * (1.0 + 1e-12)).floor() as usize;
        let segments = integrate_segments(p, n.max(1), h)?;
        Self::new(p, segments)
    }

    pub fn segments(&self) -> &[SegmentSolution] {
        &self.segments
    }

    /// Right end of the covered interval, `2Nτ`.
    pub fn end(&self) -> f64 {
        2.0 * self.tau * (self.segments.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> Result<(usize, usize, f64)> {
        let end = self.end();
        let slack = 1e-12 * end.max(self.tau);
        if !t.is_finite() || t < -2.0 * self.tau - slack || t > end + slack {
            return Err(Error::DomainError(format!("t = {t} outside [{}, {end}]", -2.0 * self.tau)));
        }
        let n = ((t / (2.0 * self.tau)).ceil().max(0.0) as usize).min(self.segments.len() - 1);
        let seg = &self.segments[n];
        let s = (t - 2.0 * self.tau * n as f64).clamp(-2.0 * self.tau, 0.0);
        let cells = seg.len() - 1;
        let i = (((s + 2.0 * self.tau) / seg.step).floor().max(0.0) as usize).min(cells - 1);
        let u = ((s - seg.s[i]) / seg.step).clamp(0.0, 1.0);
        Ok((n, i, u))
    }

    fn hermite(h: f64, u: f64, y0: &[f64], d0: &[f64], y1: &[f64], d1: &[f64]) -> Vec<f64> {
        let (u2, u3) = (u * u, u * u * u);
        let b00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let b10 = u3 - 2.0 * u2 + u;
        let b01 = -2.0 * u3 + 3.0 * u2;
        let b11 = u3 - u2;
        (0..y0.len()).map(|k| b00 * y0[k] + h * b10 * d0[k] + b01 * y1[k] + h * b11 * d1[k]).collect()
    }

    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let (n, i, u) = self.locate(t)?;
        let seg = &self.segments[n];
        Ok(Self::hermite(seg.step, u, &seg.x[i], &seg.dx[i], &seg.x[i + 1], &seg.dx[i + 1]))
    }

    /// `ẋ(t)`, interpolated with `ẍ_n = Ω² x_{n−1} + f` as the slope data.
    pub fn deriv_at(&self, t: f64) -> Result<Vec<f64>> {
        let (n, i, u) = self.locate(t)?;
        let seg = &self.segments[n];
        if n == 0 {
            // slope data of the history segment would need φ̈; linear in ẋ instead
            return Ok(seg.dx[i].iter().zip(&seg.dx[i + 1]).map(|(a, b)| a + u * (b - a)).collect());
        }
        let prev = &self.segments[n - 1];
        let accel = |j: usize| {
            let mut a = self.omega_sq.apply(&prev.x[j]);
            if !self.forcing.is_zero() {
                axpy(1.0, &self.forcing.eval(2.0 * self.tau * n as f64 + seg.s[j]), &mut a);
            }
            a
        };
        Ok(Self::hermite(seg.step, u, &seg.dx[i], &accel(i), &seg.dx[i + 1], &accel(i + 1)))
    }
}

/// One row of an [`AprioriReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentBound {
    pub n: usize,
    pub observed: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub kappa: f64,
    pub per_segment: Vec<SegmentBound>,
    pub all_satisfied: bool,
}

/// `κ = 1 + (1 + 2τ)(1 + ‖Ω‖²)`.
pub fn kappa(omega_norm: f64, tau: f64) -> f64 {
    1.0 + (1.0 + 2.0 * tau) * (1.0 + omega_norm * omega_norm)
}

/// Compares the grid `C¹` norm of each segment with `κⁿ(‖φ‖_{C¹} + ‖f‖_{L¹(0, 2nτ)})`.
pub fn apriori_check(p: &DelayProblem, segments: &[SegmentSolution]) -> Result<AprioriReport> {
    apriori_check_with_rule(p, segments, &QuadratureRule::default())
}

pub fn apriori_check_with_rule(p: &DelayProblem, segments: &[SegmentSolution], rule: &QuadratureRule) -> Result<AprioriReport> {
    let Some(history) = segments.iter().find(|s| s.index == 0) else {
        return Err(Error::InvalidParameter("segments must include the history segment".into()));
    };
    let k = kappa(p.omega().norm(), p.tau());
    let phi = history.c1_norm();
    let mut per_segment = Vec::with_capacity(segments.len());
    for seg in segments {
        let f = p.forcing().l1_norm(0.0, 2.0 * p.tau() * seg.index as f64, rule)?;
        let bound = k.powi(seg.index as i32) * (phi + f);
        let observed = seg.c1_norm();
        per_segment.push(SegmentBound { n: seg.index, observed, bound, satisfied: observed <= bound });
    }
    let all_satisfied = per_segment.iter().all(|r| r.satisfied);
    Ok(AprioriReport { kappa: k, per_segment, all_satisfied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ForcingFunction, HistoryFunction};
    use approx::assert_abs_diff_eq;

    fn problem(omega: f64, tau: f64, c: f64, f: ForcingFunction, horizon: f64) -> DelayProblem {
        DelayProblem::new(Operator::scalar(omega), tau, HistoryFunction::constant(tau, vec![c]).unwrap(), f, horizon).unwrap()
    }

    #[test]
    fn constant_history_first_segment() {
        let p = problem(1.0, 0.5, 1.0, ForcingFunction::zero(1), 2.0);
        let segs = integrate_segments(&p, 1, 1.0 / 512.0).unwrap();
        let last = segs[1].x.last().unwrap()[0];
        assert_abs_diff_eq!(last, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_omega_keeps_constant() {
        let p = problem(0.0, 0.5, 3.0, ForcingFunction::zero(1), 4.0);
        for seg in integrate_segments(&p, 4, 0.125).unwrap() {
            assert!(seg.x.iter().all(|v| v[0] == 3.0));
            assert!(seg.dx.iter().all(|v| v[0] == 0.0));
        }
    }

    #[test]
    fn forced_constant_history_midpoint() {
        let p = problem(1.0, 0.5, 1.0, ForcingFunction::constant(vec![1.0]), 2.0);
        let sol = StepSolution::solve(&p, 1.0 / 512.0).unwrap();
        assert_abs_diff_eq!(sol.value_at(0.5).unwrap()[0], 1.25, epsilon = 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let p = problem(1.0, 0.5, 1.0, ForcingFunction::zero(1), 2.0);
        assert!(matches!(integrate_segments(&p, 1, 0.3), Err(Error::GridMismatch { .. })));
        assert!(matches!(integrate_segments(&p, 1, -0.1), Err(Error::GridMismatch { .. })));
        assert!(matches!(integrate_segments(&p, 3, 0.25), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn matching_conditions_hold_exactly() {
        let p = problem(1.7, 0.4, -0.6, ForcingFunction::constant(vec![0.3]), 4.0);
        let segs = integrate_segments(&p, 5, 0.8 / 64.0).unwrap();
        for w in segs.windows(2) {
            assert_eq!(w[1].x[0], *w[0].x.last().unwrap());
            assert_eq!(w[1].dx[0], *w[0].dx.last().unwrap());
        }
    }

    #[test]
    fn apriori_examples() {
        let zero = problem(1.0, 0.5, 0.0, ForcingFunction::zero(1), 4.0);
        let segs = integrate_segments(&zero, 3, 1.0 / 64.0).unwrap();
        let report = apriori_check(&zero, &segs).unwrap();
        assert!(report.all_satisfied);
        assert!(report.per_segment.iter().all(|r| r.observed == 0.0));

        let p = problem(1.0, 0.5, 1.0, ForcingFunction::zero(1), 4.0);
        let segs = integrate_segments(&p, 3, 1.0 / 512.0).unwrap();
        let report = apriori_check(&p, &segs).unwrap();
        assert_eq!(report.kappa, 5.0);
        assert!(report.all_satisfied);
        assert_eq!(report.per_segment.last().unwrap().bound, 125.0);
        assert!(report.per_segment.last().unwrap().observed < 125.0);
    }

    #[test]
    fn queries_interpolate_between_nodes() {
        // x(t) = 1 + t²/2 on [0, 1] for τ = 0.5, Ω = 1, φ ≡ 1
        let p = problem(1.0, 0.5, 1.0, ForcingFunction::zero(1), 1.0);
        let sol = StepSolution::solve(&p, 1.0 / 16.0).unwrap();
        for t in [0.03, 0.41, 0.777, 1.0] {
            assert_abs_diff_eq!(sol.value_at(t).unwrap()[0], 1.0 + 0.5 * t * t, epsilon = 1e-13);
            assert_abs_diff_eq!(sol.deriv_at(t).unwrap()[0], t, epsilon = 1e-13);
        }
        assert!(sol.value_at(1.5).is_err());
    }
}
