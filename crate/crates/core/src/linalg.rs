//! Dense real linear algebra for the small operators in scope: spectral norm,
//! inverse and the classical matrix exponential.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Relative pivot threshold below which elimination declares the operator singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Number of Taylor terms used on the scaled exponent.
const EXP_SERIES_TERMS: usize = 13;

/// Scaled norm target for the squaring phase.
const EXP_SCALED_NORM: f64 = 0.5;

/// A dense square real matrix acting on ℝⁿ.
///
/// Entries are immutable after construction, which lets the spectral norm and
/// the inverse be cached lazily. Both caches are `OnceLock`s, so concurrent
/// readers racing on the first computation all observe the same value.
pub struct Operator {
    dim: usize,
    entries: Vec<f64>,
    norm: OnceLock<f64>,
    inverse: OnceLock<Box<Operator>>,
}

impl Operator {
    /// Builds an operator from row-major entries.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("operator dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        Ok(Self::raw(dim, entries))
    }

    /// Builds an operator from nested rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self::raw(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        Self::raw(dim, vec![0.0; dim * dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn scalar(value: f64) -> Self {
        Self::raw(1, vec![value])
    }

    fn raw(dim: usize, entries: Vec<f64>) -> Self {
        Self { dim, entries, norm: OnceLock::new(), inverse: OnceLock::new() }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::raw(self.dim, self.entries.iter().map(|v| alpha * v).collect())
    }

    /// `self += alpha * other`. Only valid on accumulators with empty caches.
    pub(crate) fn add_scaled_assign(&mut self, alpha: f64, other: &Operator) {
        debug_assert!(self.norm.get().is_none() && self.inverse.get().is_none());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += alpha * b;
        }
    }

    pub fn matmul(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.entries[k * n..(k + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Self::raw(n, out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, x.len(), "vector dimension differs from operator");
        self.entries.chunks(self.dim).map(|row| dot(row, x)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Induced 2-norm, cached after the first call.
    pub fn norm(&self) -> f64 {
        *self.norm.get_or_init(|| operator_norm(self))
    }

    /// Inverse, cached after the first successful call.
    pub fn inverse(&self) -> Result<&Operator> {
        if let Some(inv) = self.inverse.get() {
            return Ok(inv);
        }
        let inv = invert(self)?;
        Ok(self.inverse.get_or_init(|| Box::new(inv)))
    }

    /// `‖A⁻¹‖`, or `SingularOperator` when the inverse does not exist numerically.
    pub fn inverse_norm(&self) -> Result<f64> {
        Ok(self.inverse()?.norm())
    }
}

impl Clone for Operator {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.clone(),
            norm: self.norm.clone(),
            inverse: self.inverse.clone(),
        }
    }
}

impl PartialEq for Operator {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator").field("dim", &self.dim).field("rows", &self.rows()).finish()
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        Operator::raw(self.dim, self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        Operator::raw(self.dim, self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::raw(self.dim, self.entries.iter().map(|v| -v).collect())
    }
}

/// Largest singular value of `a`, from the cyclic Jacobi eigen-decomposition of `AᵀA`.
pub fn operator_norm(a: &Operator) -> f64 {
    let gram = &a.transpose() * a;
    let eigs = symmetric_eigenvalues(&gram);
    eigs.into_iter().fold(0.0_f64, f64::max).max(0.0).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(s: &Operator) -> Vec<f64> {
    let n = s.dim();
    let mut a = s.entries().to_vec();
    let scale = s.frobenius_norm();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Gauss-Jordan elimination with partial pivoting.
fn invert(a: &Operator) -> Result<Operator> {
    let n = a.dim();
    let threshold = PIVOT_TOLERANCE * a.norm();
    let mut m = a.entries().to_vec();
    let mut inv = Operator::identity(n).entries;
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[r * n + col]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("non-empty pivot range");
        if pivot.abs() <= threshold || threshold == 0.0 {
            return Err(Error::SingularOperator { pivot: pivot.abs(), threshold });
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let p = 1.0 / pivot;
        for k in 0..n {
            m[col * n + k] *= p;
            inv[col * n + k] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..n {
                m[r * n + k] -= factor * m[col * n + k];
                inv[r * n + k] -= factor * inv[col * n + k];
            }
        }
    }
    Ok(Operator::raw(n, inv))
}

/// Returns `A⁻¹` (cloned out of the cache on `a`).
pub fn inverse(a: &Operator) -> Result<Operator> {
    a.inverse().cloned()
}

/// `e^{tA}` by scaling and squaring with a truncated Taylor series.
pub fn matrix_exp(a: &Operator, t: f64) -> Result<Operator> {
    if !t.is_finite() {
        return Err(Error::NonFiniteInput(format!("matrix_exp time {t}")));
    }
    if !a.is_finite() {
        return Err(Error::NonFiniteInput("matrix_exp operator has non-finite entries".into()));
    }
    let n = a.dim();
    if t == 0.0 {
        return Ok(Operator::identity(n));
    }
    let bound = a.frobenius_norm() * t.abs();
    let squarings = if bound > EXP_SCALED_NORM {
        (bound / EXP_SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(t * 2f64.powi(-squarings));

    // Horner form of Σ_{k<13} X^k / k!
    let mut acc = Operator::identity(n);
    for k in (1..EXP_SERIES_TERMS).rev() {
        acc = (&scaled * &acc).scale(1.0 / k as f64);
        acc.add_scaled_assign(1.0, &Operator::identity(n));
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a vector.
#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean distance between two vectors.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
