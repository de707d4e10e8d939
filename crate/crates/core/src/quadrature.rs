//! Composite quadrature that never lets a cell straddle a supplied knot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 2;
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GaussLegendre,
    Simpson,
}

/// A per-cell rule on the reference interval `[-1, 1]`.
///
/// For Simpson the node count is rounded up to the next odd number so that
/// the cell splits into an even number of panels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    scheme: Scheme,
    nodes_per_cell: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(scheme: Scheme, nodes_per_cell: usize) -> Result<Self> {
        if !(MIN_NODES..=MAX_NODES).contains(&nodes_per_cell) {
            return Err(Error::InvalidParameter(format!(
                "nodes_per_cell must lie in [{MIN_NODES}, {MAX_NODES}], got {nodes_per_cell}"
            )));
        }
        let (nodes, weights) = match scheme {
            Scheme::GaussLegendre => gauss_legendre_nodes(nodes_per_cell),
            Scheme::Simpson => simpson_nodes(nodes_per_cell),
        };
        Ok(Self { scheme, nodes_per_cell, nodes, weights })
    }

    pub fn gauss_legendre(nodes_per_cell: usize) -> Result<Self> {
        Self::new(Scheme::GaussLegendre, nodes_per_cell)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes_per_cell
    }

    /// Reference nodes and weights on `[-1, 1]`.
    pub fn reference(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }
}

impl Default for QuadratureRule {
    /// Gauss-Legendre with 8 nodes per cell.
    fn default() -> Self {
        Self::gauss_legendre(8).expect("8 nodes is a valid rule")
    }
}

/// Gauss-Legendre nodes and weights by Newton iteration on the three-term recurrence.
fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn simpson_nodes(requested: usize) -> (Vec<f64>, Vec<f64>) {
    let points = if requested % 2 == 1 { requested } else { requested + 1 };
    let panels = points - 1;
    let h = 2.0 / panels as f64;
    let nodes = (0..points).map(|i| -1.0 + h * i as f64).collect();
    let weights = (0..points)
        .map(|i| {
            let c = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Splits `[a, b]` at every knot strictly inside it. Knots outside are ignored.
pub fn cell_boundaries(a: f64, b: f64, knots: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = knots.iter().copied().filter(|&k| k > a && k < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 2);
    out.push(a);
    for k in cuts {
        if k > *out.last().unwrap() {
            out.push(k);
        }
    }
    if b > *out.last().unwrap() {
        out.push(b);
    }
    out
}

/// Integrates a vector-valued `g` over `[a, b]`, with cells split at `knots`.
pub fn integrate<F>(mut g: F, a: f64, b: f64, knots: &[f64], rule: &QuadratureRule) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Vec<f64>,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFiniteInput(format!("integration limits [{a}, {b}]")));
    }
    if a > b {
        return Err(Error::InvalidInterval { a, b });
    }
    let cells = cell_boundaries(a, b, knots);
    let mut total: Option<Vec<f64>> = None;
    for w in cells.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let t = mid + half * x;
            let sample = g(t);
            if sample.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(t));
            }
            let acc = total.get_or_insert_with(|| vec![0.0; sample.len()]);
            for (s, v) in acc.iter_mut().zip(&sample) {
                *s += half * wt * v;
            }
        }
    }
    match total {
        Some(v) => Ok(v),
        // degenerate interval: the dimension still comes from the integrand
        None => Ok(vec![0.0; g(a).len()]),
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut g: F, a: f64, b: f64, knots: &[f64], rule: &QuadratureRule) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|t| vec![g(t)], a, b, knots, rule).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_examples() {
        let rule = QuadratureRule::default();
        assert_abs_diff_eq!(integrate_scalar(|t| t, 0.0, 1.0, &[], &rule).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate_scalar(f64::abs, -1.0, 1.0, &[0.0], &rule).unwrap(), 1.0, epsilon = 1e-15);
        let e = integrate_scalar(f64::exp, 0.0, 1.0, &[], &rule).unwrap();
        assert_abs_diff_eq!(e, std::f64::consts::E - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in MIN_NODES..=MAX_NODES {
            for scheme in [Scheme::GaussLegendre, Scheme::Simpson] {
                let rule = QuadratureRule::new(scheme, n).unwrap();
                let (x, w) = rule.reference();
                assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
                assert!(x.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }

    #[test]
    fn gauss_exact_up_to_degree_2n_minus_1() {
        for n in [2, 3, 5, 8, 16, 33, 64] {
            let rule = QuadratureRule::gauss_legendre(n).unwrap();
            for deg in 0..(2 * n).min(40) {
                let got = integrate_scalar(|t| t.powi(deg as i32), 0.0, 1.0, &[], &rule).unwrap();
                assert_abs_diff_eq!(got, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let rule = QuadratureRule::new(Scheme::Simpson, 4).unwrap();
        assert_eq!(rule.reference().0.len(), 5);
        let got = integrate_scalar(|t| t * t * t - 2.0 * t, -1.0, 3.0, &[0.5], &rule).unwrap();
        assert_abs_diff_eq!(got, 12.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rule = QuadratureRule::default();
        assert!(matches!(integrate_scalar(|t| t, 1.0, 0.0, &[], &rule), Err(Error::InvalidInterval { .. })));
        assert!(matches!(
            integrate_scalar(|_| f64::NAN, 0.0, 1.0, &[], &rule),
            Err(Error::NonFiniteValue(_))
        ));
        assert!(QuadratureRule::gauss_legendre(1).is_err());
        assert!(QuadratureRule::gauss_legendre(65).is_err());
    }

    #[test]
    fn degenerate_interval_is_zero() {
        let rule = QuadratureRule::default();
        let v = integrate(|t| vec![t, 1.0], 2.0, 2.0, &[], &rule).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn knots_outside_are_ignored() {
        assert_eq!(cell_boundaries(0.0, 1.0, &[-1.0, 0.5, 0.5, 2.0, 0.0]), vec![0.0, 0.5, 1.0]);
    }
}
