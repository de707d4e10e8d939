//! The oscillator without delay, `ẍ − Ω²x = f`, `x(0) = x₀`, `ẋ(0) = x₁`.
//!
//! With `C(t) = ½(e^{Ωt} + e^{−Ωt})` and `S(t) = ½Ω⁻¹(e^{Ωt} − e^{−Ωt})` the
//! solution is `x(t) = C(t)x₀ + S(t)x₁ + ∫₀ᵗ S(t−s) f(s) ds`. Both `C` and `S`
//! are read off the exponential of the first-order companion generator
//!
//! ```text
//!     A = [ 0   I ]        e^{tA} = [ C(t)     S(t) ]
//!         [ Ω²  0 ]                 [ Ω²S(t)   C(t) ]
//! ```
//!
//! so `Ω` need not be invertible.

use crate::error::{Error, Result};
use crate::linalg::{axpy, matrix_exp, Operator};
use crate::problem::ForcingFunction;
use crate::quadrature::{integrate, QuadratureRule};

#[derive(Debug, Clone)]
pub struct ClassicalProblem {
    omega: Operator,
    generator: Operator,
    x0: Vec<f64>,
    x1: Vec<f64>,
    forcing: ForcingFunction,
    horizon: f64,
}

impl ClassicalProblem {
    pub fn new(omega: Operator, x0: Vec<f64>, x1: Vec<f64>, forcing: ForcingFunction, horizon: f64) -> Result<Self> {
        let n = omega.dim();
        for got in [x0.len(), x1.len(), forcing.dim()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let omega_sq = &omega * &omega;
        let generator = Operator::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, false) if j - n == i => 1.0,
            (false, true) => omega_sq.get(i - n, j),
            _ => 0.0,
        });
        Ok(Self { omega, generator, x0, x1, forcing, horizon })
    }

    pub fn omega(&self) -> &Operator {
        &self.omega
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn forcing(&self) -> &ForcingFunction {
        &self.forcing
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn propagator(&self, t: f64) -> Result<Operator> {
        matrix_exp(&self.generator, t)
    }

    /// Position and velocity at `t`.
    pub fn state(&self, t: f64, rule: &QuadratureRule) -> Result<(Vec<f64>, Vec<f64>)> {
        if !t.is_finite() || t < 0.0 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfHorizon { t, horizon: self.horizon });
        }
        let n = self.omega.dim();
        let mut initial = self.x0.clone();
        initial.extend_from_slice(&self.x1);
        let mut z = self.propagator(t)?.apply(&initial);

        if !self.forcing.is_zero() && t > 0.0 {
            let cell = 1.0 / (1.0 + self.omega.norm());
            let mut knots: Vec<f64> = self.forcing.kinks().to_vec();
            let cells = (t / cell).ceil() as usize;
            knots.extend((1..cells).map(|k| t * k as f64 / cells as f64));
            let mut err = None;
            let duhamel = integrate(
                |s| {
                    let mut lifted = vec![0.0; n];
                    lifted.extend(self.forcing.eval(s));
                    match self.propagator(t - s) {
                        Ok(p) => p.apply(&lifted),
                        Err(e) => {
                            err.get_or_insert(e);
                            vec![0.0; 2 * n]
                        }
                    }
                },
                0.0,
                t,
                &knots,
                rule,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            axpy(1.0, &duhamel, &mut z);
        }
        let v = z.split_off(n);
        Ok((z, v))
    }
}

/// `x̄(t)` of the oscillator without delay.
pub fn classical_solution(p: &ClassicalProblem, t: f64, rule: &QuadratureRule) -> Result<Vec<f64>> {
    p.state(t, rule).map(|(x, _)| x)
}

/// `x̄'(t)` of the oscillator without delay.
pub fn classical_velocity(p: &ClassicalProblem, t: f64, rule: &QuadratureRule) -> Result<Vec<f64>> {
    p.state(t, rule).map(|(_, v)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inverse;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn rule() -> QuadratureRule {
        QuadratureRule::default()
    }

    #[test]
    fn homogeneous_decay_branch() {
        let p = ClassicalProblem::new(Operator::scalar(1.0), vec![1.0], vec![-1.0], ForcingFunction::zero(1), 2.0).unwrap();
        assert_abs_diff_eq!(classical_solution(&p, 1.0, &rule()).unwrap()[0], 0.367879441171442, epsilon = 1e-13);
        assert_abs_diff_eq!(classical_velocity(&p, 1.0, &rule()).unwrap()[0], -0.367879441171442, epsilon = 1e-13);
    }

    #[test]
    fn initial_conditions() {
        let omega = Operator::from_rows(&[vec![0.3, 1.0], vec![-0.2, 0.5]]).unwrap();
        let f = ForcingFunction::constant(vec![1.0, -2.0]);
        let p = ClassicalProblem::new(omega, vec![0.5, 2.0], vec![-1.0, 0.25], f, 3.0).unwrap();
        assert_eq!(classical_solution(&p, 0.0, &rule()).unwrap(), vec![0.5, 2.0]);
        assert_eq!(classical_velocity(&p, 0.0, &rule()).unwrap(), vec![-1.0, 0.25]);
    }

    #[test]
    fn unit_forcing_duhamel() {
        let p = ClassicalProblem::new(Operator::scalar(1.0), vec![0.0], vec![0.0], ForcingFunction::constant(vec![1.0]), 1.0)
            .unwrap();
        assert_abs_diff_eq!(classical_solution(&p, 1.0, &rule()).unwrap()[0], 1f64.cosh() - 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(classical_velocity(&p, 1.0, &rule()).unwrap()[0], 1f64.sinh(), epsilon = 1e-13);
    }

    #[test]
    fn horizon_guard() {
        let p = ClassicalProblem::new(Operator::scalar(1.0), vec![0.0], vec![0.0], ForcingFunction::zero(1), 1.0).unwrap();
        assert!(matches!(classical_solution(&p, 1.5, &rule()), Err(Error::OutOfHorizon { .. })));
        assert!(matches!(classical_solution(&p, -0.1, &rule()), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn singular_omega_is_free_motion() {
        let p = ClassicalProblem::new(Operator::zeros(2), vec![1.0, 2.0], vec![0.5, -1.0], ForcingFunction::zero(2), 4.0)
            .unwrap();
        let x = classical_solution(&p, 3.0, &rule()).unwrap();
        assert_abs_diff_eq!(x[0], 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn group_branch() {
        // x1 = Ωx0 and f = 0 give x(t) = e^{Ωt}x0
        let omega = Operator::from_rows(&[vec![0.4, -0.3], vec![0.8, 0.1]]).unwrap();
        let x0 = vec![1.0, -0.5];
        let x1 = omega.apply(&x0);
        let p = ClassicalProblem::new(omega.clone(), x0.clone(), x1, ForcingFunction::zero(2), 3.0).unwrap();
        for t in [0.3, 1.1, 2.9] {
            let expected = matrix_exp(&omega, t).unwrap().apply(&x0);
            let got = classical_solution(&p, t, &rule()).unwrap();
            assert!(crate::linalg::distance(&got, &expected) <= 1e-9);
        }
    }

    #[test]
    fn companion_route_matches_hyperbolic_formula() {
        // C and S against ½(e^{Ωt} ± e^{−Ωt}) with an explicit inverse
        let omega = Operator::from_rows(&[vec![1.2, 0.3], vec![-0.4, 0.7]]).unwrap();
        let inv = inverse(&omega).unwrap();
        let p = ClassicalProblem::new(omega.clone(), vec![0.0; 2], vec![0.0; 2], ForcingFunction::zero(2), 5.0).unwrap();
        for t in [0.2, 1.0, 2.5] {
            let plus = matrix_exp(&omega, t).unwrap();
            let minus = matrix_exp(&omega, -t).unwrap();
            let cosh = (&plus + &minus).scale(0.5);
            let sinh = (&inv * &(&plus - &minus)).scale(0.5);
            let block = p.propagator(t).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(block.get(i, j), cosh.get(i, j), epsilon = 1e-11);
                    assert_abs_diff_eq!(block.get(i, j + 2), sinh.get(i, j), epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn residual_of_trig_forcing() {
        let omega = Operator::from_rows(&[vec![0.5, 0.2], vec![0.1, -0.7]]).unwrap();
        let f = ForcingFunction::new(2, Arc::new(|t| vec![t.sin(), (2.0 * t).cos()]), vec![], crate::problem::Continuity::C0)
            .unwrap();
        let p = ClassicalProblem::new(omega.clone(), vec![0.3, -0.1], vec![1.0, 0.0], f.clone(), 4.0).unwrap();
        let sq = &omega * &omega;
        let h = 1e-4;
        for t in [0.7, 1.9, 3.3] {
            let xm = classical_solution(&p, t - h, &rule()).unwrap();
            let x = classical_solution(&p, t, &rule()).unwrap();
            let xp = classical_solution(&p, t + h, &rule()).unwrap();
            let ax = sq.apply(&x);
            let ft = f.eval(t);
            for k in 0..2 {
                let acc = (xp[k] - 2.0 * x[k] + xm[k]) / (h * h);
                assert_abs_diff_eq!(acc - ax[k], ft[k], epsilon = 1e-5);
            }
            let v = classical_velocity(&p, t, &rule()).unwrap();
            let hv = 1e-5;
            let xm = classical_solution(&p, t - hv, &rule()).unwrap();
            let xp = classical_solution(&p, t + hv, &rule()).unwrap();
            for k in 0..2 {
                assert_abs_diff_eq!((xp[k] - xm[k]) / (2.0 * hv), v[k], epsilon = 1e-7);
            }
        }
    }
}
