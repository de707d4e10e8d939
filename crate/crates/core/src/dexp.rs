//! The delayed exponential `exp_τ(t; Ω)` and the fundamental solutions
//! `x¹_τ`, `x²_τ` of `ẍ(t) = Ω² x(t − 2τ)`.
//!
//! On `[(k−1)τ, kτ)` the delayed exponential is the operator polynomial
//!
//! ```text
//!     exp_τ(t; Ω) = Σ_{j=0..k} Ωʲ (t − (j−1)τ)ʲ / j!
//! ```
//!
//! it is the identity on `[−τ, 0)` and zero below `−τ`. Every evaluator here
//! sums the defining terms directly; no inverse of `Ω` is ever formed. At a
//! knot `kτ` the right-hand limit is returned.
//!
//! The terms alternate in sign when `Ω` has negative spectrum and cancel
//! heavily for large `t`, so powers, shifts, monomials and the sum itself are
//! carried in double-double arithmetic and rounded once at the end.

use std::sync::{Arc, OnceLock, RwLock};

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg::Operator;

/// Evaluation is refused beyond this many delay intervals.
pub const MAX_KNOTS: usize = 256;

/// Relative distance to a knot under which `t` is treated as sitting on it.
const KNOT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self, power: usize) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus if power % 2 == 1 => -1.0,
            Sign::Minus => 1.0,
        }
    }
}

/// Which terms of the defining sum take part, and how the power of `Ω`
/// relates to the term index.
#[derive(Debug, Clone, Copy)]
enum Terms {
    /// every `j`, power `j`
    All(Sign),
    /// even `j`, power `j` (this is `x¹`)
    Even,
    /// odd `j`, power `j − 1` (this is `x²`)
    Odd,
}

impl Terms {
    fn power(self, j: usize) -> Option<usize> {
        match self {
            Terms::All(_) => Some(j),
            Terms::Even if j.is_multiple_of(2) => Some(j),
            Terms::Odd if j % 2 == 1 => Some(j - 1),
            _ => None,
        }
    }

    fn sign(self, j: usize) -> f64 {
        match self {
            Terms::All(s) => s.factor(j),
            _ => 1.0,
        }
    }
}

/// `u^m / m!` for `u ≥ 0`.
fn scaled_monomial(u: TwoFloat, m: usize) -> TwoFloat {
    if m == 0 {
        return TwoFloat::from(1.0);
    }
    if u.hi() <= 0.0 {
        return TwoFloat::from(0.0);
    }
    let table = factorial_tables();
    if m < table.inv.len() {
        let v = u.powi(m as i32) * table.inv[m];
        // keep the low word out of the subnormal range
        if v.hi().is_finite() && v.hi() > 1e-280 && v.hi() < 1e300 {
            return v;
        }
    }
    TwoFloat::from((m as f64 * u.hi().ln() - table.ln[m]).exp())
}

struct FactorialTables {
    inv: Vec<TwoFloat>,
    ln: Vec<f64>,
}

fn factorial_tables() -> &'static FactorialTables {
    static TABLES: OnceLock<FactorialTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        // 170! is the largest factorial representable in binary64
        let mut inv = vec![TwoFloat::from(1.0); 171];
        for k in 1..inv.len() {
            inv[k] = inv[k - 1] / k as f64;
        }
        let mut ln = vec![0.0; MAX_KNOTS + 3];
        for k in 1..ln.len() {
            ln[k] = ln[k - 1] + (k as f64).ln();
        }
        FactorialTables { inv, ln }
    })
}

/// Row-major double-double entries of `Ωᵏ`.
type Power = Vec<TwoFloat>;

fn to_operator(n: usize, p: &Power) -> Operator {
    Operator::from_fn(n, |i, j| f64::from(p[i * n + j]))
}

/// Evaluator for `exp_τ(·; ±Ω)`, `x¹_τ(·; Ω)`, `x²_τ(·; Ω)` and their derivatives.
///
/// Powers `Ωᵏ` are cached and grown on demand; the cache only ever grows and
/// is shared by concurrent queries.
#[derive(Debug)]
pub struct DelayedExpEvaluator {
    omega: Operator,
    tau: f64,
    powers: RwLock<Vec<Power>>,
}

impl Clone for DelayedExpEvaluator {
    fn clone(&self) -> Self {
        let powers = self.powers.read().expect("power cache poisoned").clone();
        Self { omega: self.omega.clone(), tau: self.tau, powers: RwLock::new(powers) }
    }
}

impl DelayedExpEvaluator {
    pub fn new(omega: Operator, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive and finite, got {tau}")));
        }
        if !omega.is_finite() {
            return Err(Error::NonFiniteInput("omega has non-finite entries".into()));
        }
        let n = omega.dim();
        let identity = (0..n * n).map(|k| TwoFloat::from(if k % (n + 1) == 0 { 1.0 } else { 0.0 })).collect();
        let first = omega.entries().iter().map(|&w| TwoFloat::from(w)).collect();
        let powers = vec![identity, first];
        Ok(Self { omega, tau, powers: RwLock::new(powers) })
    }

    pub fn omega(&self) -> &Operator {
        &self.omega
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    /// `Ωᵏ` from the cache.
    pub fn power(&self, k: usize) -> Operator {
        self.ensure_powers(k);
        to_operator(self.dim(), &self.powers.read().expect("power cache poisoned")[k])
    }

    /// Number of cached powers (`Ω⁰ … Ωᵏ⁻¹`).
    pub fn cached_powers(&self) -> usize {
        self.powers.read().expect("power cache poisoned").len()
    }

    fn ensure_powers(&self, k: usize) {
        if self.powers.read().expect("power cache poisoned").len() > k {
            return;
        }
        let mut cache = self.powers.write().expect("power cache poisoned");
        while cache.len() <= k {
            let n = self.dim();
            let (last, first) = (&cache[cache.len() - 1], &cache[1]);
            let next = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    (0..n).fold(TwoFloat::from(0.0), |acc, l| acc + last[i * n + l] * first[l * n + j])
                })
                .collect();
            cache.push(next);
        }
    }

    /// Index `⌊t/τ⌋`, snapped onto a knot when `t` is within rounding of it.
    pub fn interval_index(&self, t: f64) -> i64 {
        let r = t / self.tau;
        let nearest = r.round();
        if (r - nearest).abs() <= KNOT_SNAP * r.abs().max(1.0) {
            nearest as i64
        } else {
            r.floor() as i64
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFiniteInput(format!("time {t}")));
        }
        if t > MAX_KNOTS as f64 * self.tau * (1.0 + KNOT_SNAP) {
            return Err(Error::ExcessiveHorizon { t, tau: self.tau, max_knots: MAX_KNOTS });
        }
        Ok(())
    }

    /// `dᵐ/dtᵐ` of the selected partial sum, right-limit at knots.
    fn series(&self, t: f64, terms: Terms, order: usize) -> Result<Operator> {
        self.check(t)?;
        let n = self.dim();
        let floor = self.interval_index(t);
        if floor < -1 {
            return Ok(Operator::zeros(n));
        }
        let top = (floor + 1) as usize;
        self.ensure_powers(top);
        let cache = self.powers.read().expect("power cache poisoned");
        let mut sum = vec![TwoFloat::from(0.0); n * n];
        for j in order..=top {
            let Some(p) = terms.power(j) else { continue };
            let shift = TwoFloat::new_mul(j as f64 - 1.0, self.tau);
            let u = TwoFloat::from(t) - shift;
            let c = scaled_monomial(u, j - order) * terms.sign(j);
            if c.hi() == 0.0 {
                continue;
            }
            for (s, &w) in sum.iter_mut().zip(&cache[p]) {
                *s += c * w;
            }
        }
        Ok(to_operator(n, &sum))
    }

    /// `exp_τ(t; ±Ω)`.
    pub fn delayed_exp(&self, t: f64, sign: Sign) -> Result<Operator> {
        self.series(t, Terms::All(sign), 0)
    }

    /// `dᵐ/dtᵐ exp_τ(t; ±Ω)` for `m ∈ {1, 2}`, equal to `(±Ω)ᵐ exp_τ(t − mτ; ±Ω)`.
    pub fn delayed_exp_derivative(&self, t: f64, sign: Sign, order: usize) -> Result<Operator> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidParameter(format!("derivative order must be 1 or 2, got {order}")));
        }
        self.series(t, Terms::All(sign), order)
    }

    /// `x¹_τ(t; Ω)` from its even-power expansion.
    pub fn fundamental_x1(&self, t: f64) -> Result<Operator> {
        self.series(t, Terms::Even, 0)
    }

    /// `x²_τ(t; Ω)` from its odd-degree expansion; zero for `t < 0`.
    pub fn fundamental_x2(&self, t: f64) -> Result<Operator> {
        self.series(t, Terms::Odd, 0)
    }

    /// `dᵐ/dtᵐ x¹_τ(t; Ω)` by term-wise differentiation, `m ≤ 2`.
    pub fn fundamental_x1_derivative(&self, t: f64, order: usize) -> Result<Operator> {
        self.series(t, Terms::Even, order)
    }

    /// `dᵐ/dtᵐ x²_τ(t; Ω)` by term-wise differentiation, `m ≤ 2`.
    pub fn fundamental_x2_derivative(&self, t: f64, order: usize) -> Result<Operator> {
        self.series(t, Terms::Odd, order)
    }

    /// Multiples of `τ` inside `[a, b]`.
    pub fn knots_in(&self, a: f64, b: f64) -> Vec<f64> {
        let lo = (a / self.tau).ceil() as i64;
        let hi = (b / self.tau).floor() as i64;
        (lo..=hi).map(|k| k as f64 * self.tau).collect()
    }
}

/// The pair `x¹_τ(·; Ω)`, `x²_τ(·; Ω)` backed by one shared evaluator.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    evaluator: Arc<DelayedExpEvaluator>,
}

impl FundamentalPair {
    pub fn new(evaluator: Arc<DelayedExpEvaluator>) -> Self {
        Self { evaluator }
    }

    pub fn x1(&self, t: f64) -> Result<Operator> {
        self.evaluator.fundamental_x1(t)
    }

    pub fn x2(&self, t: f64) -> Result<Operator> {
        self.evaluator.fundamental_x2(t)
    }

    pub fn evaluator(&self) -> &DelayedExpEvaluator {
        &self.evaluator
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(omega: f64, tau: f64) -> DelayedExpEvaluator {
        DelayedExpEvaluator::new(Operator::scalar(omega), tau).unwrap()
    }

    fn value(op: Operator) -> f64 {
        assert_eq!(op.dim(), 1);
        op.get(0, 0)
    }

    #[test]
    fn delayed_exp_examples() {
        let omega = Operator::from_rows(&[vec![0.3, -1.2], vec![0.7, 2.0]]).unwrap();
        let ev = DelayedExpEvaluator::new(omega, 1.0).unwrap();
        assert_eq!(ev.delayed_exp(-0.5, Sign::Plus).unwrap(), Operator::identity(2));
        assert_eq!(ev.delayed_exp(-1.5, Sign::Minus).unwrap(), Operator::zeros(2));

        let zero = DelayedExpEvaluator::new(Operator::zeros(2), 1.0).unwrap();
        assert_eq!(zero.delayed_exp(7.3, Sign::Plus).unwrap(), Operator::identity(2));

        // t = 0.75 ∈ [τ, 2τ): 1 + 0.75 + 0.25²/2
        assert_abs_diff_eq!(value(scalar(1.0, 0.5).delayed_exp(0.75, Sign::Plus).unwrap()), 1.78125, epsilon = 1e-15);
    }

    #[test]
    fn derivative_examples() {
        assert_abs_diff_eq!(value(scalar(1.0, 1.0).delayed_exp_derivative(0.5, Sign::Plus, 1).unwrap()), 1.0);
        let zero = DelayedExpEvaluator::new(Operator::zeros(3), 0.7).unwrap();
        for t in [0.0, 0.3, 2.9] {
            assert_eq!(zero.delayed_exp_derivative(t, Sign::Plus, 1).unwrap(), Operator::zeros(3));
        }
        assert_abs_diff_eq!(value(scalar(2.0, 1.0).delayed_exp_derivative(2.5, Sign::Plus, 2).unwrap()), 8.0);
        assert!(scalar(1.0, 1.0).delayed_exp_derivative(1.0, Sign::Plus, 3).is_err());
    }

    #[test]
    fn x1_examples() {
        let omega = Operator::from_rows(&[vec![0.0, 1.5], vec![-0.4, 0.2]]).unwrap();
        let ev = DelayedExpEvaluator::new(omega, 0.8).unwrap();
        assert_eq!(ev.fundamental_x1(0.3 * 0.8).unwrap(), Operator::identity(2));
        assert_abs_diff_eq!(value(scalar(1.0, 1.0).fundamental_x1(1.5).unwrap()), 1.125);

        let ev = scalar(1.0, 1.0);
        let plus = value(ev.delayed_exp(-0.5, Sign::Plus).unwrap());
        let minus = value(ev.delayed_exp(-0.5, Sign::Minus).unwrap());
        assert_abs_diff_eq!(value(ev.fundamental_x1(-0.5).unwrap()), 0.5 * (plus + minus), epsilon = 1e-15);
    }

    #[test]
    fn x2_examples() {
        let omega = Operator::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0]]).unwrap();
        let tau = 0.6;
        let ev = DelayedExpEvaluator::new(omega, tau).unwrap();
        let expected = Operator::identity(2).scale(1.2 * tau);
        assert!(ev.fundamental_x2(1.2 * tau).unwrap().max_abs_diff(&expected) <= 1e-15);
        assert_eq!(ev.fundamental_x2(-0.5 * tau).unwrap(), Operator::zeros(2));
        assert_abs_diff_eq!(value(scalar(1.0, 1.0).fundamental_x2(2.5).unwrap()), 2.520833333333333, epsilon = 1e-14);
    }

    #[test]
    fn x2_derivative_is_x1_shifted() {
        let omega = Operator::from_rows(&[vec![0.5, -1.0], vec![1.0, 0.25]]).unwrap();
        let ev = DelayedExpEvaluator::new(omega, 0.4).unwrap();
        for i in 0..60 {
            let t = -0.6 + 0.071 * i as f64;
            let lhs = ev.fundamental_x2_derivative(t, 1).unwrap();
            let rhs = ev.fundamental_x1(t - 0.4).unwrap();
            assert!(lhs.max_abs_diff(&rhs) <= 1e-12, "t = {t}");
        }
    }

    #[test]
    fn guards() {
        let ev = scalar(1.0, 0.1);
        assert!(matches!(ev.delayed_exp(f64::NAN, Sign::Plus), Err(Error::NonFiniteInput(_))));
        assert!(matches!(ev.fundamental_x1(30.0), Err(Error::ExcessiveHorizon { .. })));
        assert!(ev.fundamental_x1(25.6).is_ok());
        assert!(DelayedExpEvaluator::new(Operator::scalar(1.0), 0.0).is_err());
        assert!(DelayedExpEvaluator::new(Operator::scalar(1.0), -1.0).is_err());
    }

    #[test]
    fn power_cache_matches_direct_products() {
        let omega = Operator::from_rows(&[vec![0.2, 1.0], vec![-0.5, 0.1]]).unwrap();
        let ev = DelayedExpEvaluator::new(omega.clone(), 0.5).unwrap();
        ev.fundamental_x2(3.9).unwrap();
        assert!(ev.cached_powers() >= 9);
        assert_eq!(ev.power(0), Operator::identity(2));
        let mut direct = Operator::identity(2);
        for k in 1..9 {
            direct = &direct * &omega;
            assert!(ev.power(k).max_abs_diff(&direct) <= 1e-15);
        }
    }

    #[test]
    fn snapping_gives_right_limit() {
        // 0.3 / 0.1 is 2.9999999999999996 in binary64
        let ev = scalar(1.0, 0.1);
        assert_eq!(ev.interval_index(0.3), 3);
        assert_eq!(value(ev.fundamental_x2_derivative(0.0, 1).unwrap()), 1.0);
        assert_eq!(value(ev.fundamental_x2_derivative(-1e-9, 1).unwrap()), 0.0);
    }

    #[test]
    fn large_arguments_stay_finite() {
        let ev = scalar(2.0, 0.1);
        let v = value(ev.fundamental_x1(25.0).unwrap());
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn knots_in_range() {
        let ev = scalar(1.0, 0.5);
        assert_eq!(ev.knots_in(-1.0, 1.2), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
