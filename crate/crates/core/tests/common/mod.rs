//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use delayosc::config::{generate_scenario, ScenarioConfig};
use delayosc::{linalg::operator_norm, Operator};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

type RatMatrix = Vec<Vec<BigRational>>;

fn rat_identity(n: usize) -> RatMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect()).collect()
}

fn rat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(BigRational::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

fn factorial(m: usize) -> BigRational {
    BigRational::from_integer((1..=m).fold(BigInt::one(), |acc, k| acc * BigInt::from(k)))
}

/// Which terms of the defining sum to keep.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// `exp_τ(t; Ω)`
    Exp,
    /// `x¹_τ(t; Ω)`
    X1,
    /// `x²_τ(t; Ω)`
    X2,
}

/// Exact value of the `order`-th derivative of `exp_τ`, `x¹_τ` or `x²_τ` on the
/// polynomial piece `[(k−1)τ, kτ)` with `k = piece`, evaluated at `t` in exact
/// rational arithmetic and rounded once at the end.
pub fn exact_piece(omega: &Operator, tau: f64, t: f64, kind: Kind, order: usize, piece: i64) -> Vec<f64> {
    let n = omega.dim();
    let mut out = vec![BigRational::zero(); n * n];
    if piece >= 0 {
        let om: RatMatrix = (0..n).map(|i| (0..n).map(|j| rat(omega.get(i, j))).collect()).collect();
        let (tau, t) = (rat(tau), rat(t));
        let mut power = rat_identity(n);
        let mut powers = vec![power.clone()];
        for _ in 0..=piece {
            power = rat_mul(&power, &om);
            powers.push(power.clone());
        }
        for j in 0..=(piece as usize) {
            let (keep, p, degree) = match kind {
                Kind::Exp => (true, j, j),
                Kind::X1 => (j % 2 == 0, j, j),
                Kind::X2 => (j % 2 == 1, j.saturating_sub(1), j),
            };
            if !keep || degree < order {
                continue;
            }
            let u = &t - (BigRational::from_integer(BigInt::from(j as i64 - 1)) * &tau);
            let mut mono = BigRational::one();
            for _ in 0..(degree - order) {
                mono *= &u;
            }
            let c = mono / factorial(degree - order);
            for (idx, slot) in out.iter_mut().enumerate() {
                *slot += &c * &powers[p][idx / n][idx % n];
            }
        }
    }
    out.iter().map(|v| v.to_f64().unwrap()).collect()
}

/// The piece index `⌊t/τ⌋ + 1` computed exactly.
pub fn exact_piece_index(tau: f64, t: f64) -> i64 {
    let r = rat(t) / rat(tau);
    let f = r.floor().to_integer();
    (f + BigInt::one()).to_i64().unwrap()
}

pub fn exact_delayed_exp(omega: &Operator, tau: f64, t: f64) -> Vec<f64> {
    let k = exact_piece_index(tau, t);
    if k < 0 {
        return vec![0.0; omega.dim() * omega.dim()];
    }
    exact_piece(omega, tau, t, Kind::Exp, 0, k)
}

pub fn frob(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frob_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random `n×n` operator with spectral norm drawn from `[0, max_norm]`.
pub fn random_operator(rng: &mut ChaCha8Rng, n: usize, max_norm: f64) -> Operator {
    let entries: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = Operator::from_fn(n, |i, j| entries[i * n + j]);
    let norm = operator_norm(&a);
    if norm == 0.0 {
        return a;
    }
    let target = rng.gen_range(0.0..max_norm);
    a.scale(target / norm)
}

/// True when `t` is at least `gap` away from every multiple of `tau`.
pub fn off_knot(t: f64, tau: f64, gap: f64) -> bool {
    let r = t / tau;
    (r - r.round()).abs() * tau > gap
}

/// The randomized smooth scenarios used across the suite.
pub fn suite(count: u64) -> Vec<ScenarioConfig> {
    (0..count).map(|seed| generate_scenario(1000 + seed, 1 + (seed as usize % 4))).collect()
}

pub fn sup_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

pub fn abs_max(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

