//! JSON scenario files.
//!
//! ```json
//! {
//!   "omega": [[1.0, 0.2], [0.0, 0.5]],
//!   "tau": 0.25,
//!   "tau0": 1.0,
//!   "horizon": 2.0,
//!   "history": { "kind": "polynomial", "coefficients": [[1.0, 0.0], [0.0, -1.0]] },
//!   "forcing": { "kind": "trig", "amplitude": [1.0, 0.0], "frequency": [2.0, 0.0], "kinks": [] },
//!   "grid_points": 512,
//!   "quadrature": { "scheme": "gauss-legendre", "nodes_per_cell": 8 },
//!   "variant": { "mild_form": "derived" }
//! }
//! ```

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::HistoryFamily;
use crate::classical::ClassicalProblem;
use crate::error::Error;
use crate::linalg::Operator;
use crate::problem::{Continuity, DelayProblem, ForcingFunction, HistoryFunction, Smoothness};
use crate::quadrature::{QuadratureRule, Scheme};
use crate::solver::MildForm;
use crate::steps::DEFAULT_CELLS_PER_SEGMENT;

/// A config that failed to parse or validate, with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

/// `Ω` as nested rows or as `"diag:[a, b, ...]"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Matrix(Vec<Vec<f64>>),
    Shorthand(String),
}

impl OmegaSpec {
    /// Accepts a JSON matrix literal, `diag:[...]`, or a bare number.
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let text = text.trim();
        if text.starts_with("diag:") {
            return Ok(Self::Shorthand(text.to_string()));
        }
        if let Ok(v) = text.parse::<f64>() {
            return Ok(Self::Matrix(vec![vec![v]]));
        }
        serde_json::from_str::<Vec<Vec<f64>>>(text)
            .map(Self::Matrix)
            .map_err(|e| ConfigError::new("omega", format!("expected a matrix literal or diag:[...]: {e}")))
    }

    pub fn to_operator(&self) -> ConfigResult<Operator> {
        let op = match self {
            Self::Matrix(rows) => {
                if rows.is_empty() {
                    return Err(ConfigError::new("omega", "matrix must not be empty"));
                }
                Operator::from_rows(rows).map_err(|e| ConfigError::new("omega", e.to_string()))?
            }
            Self::Shorthand(s) => {
                let body = s
                    .trim()
                    .strip_prefix("diag:")
                    .ok_or_else(|| ConfigError::new("omega", format!("unknown shorthand {s:?}, expected diag:[...]")))?;
                let values: Vec<f64> = serde_json::from_str(body.trim())
                    .map_err(|e| ConfigError::new("omega", format!("bad diag list: {e}")))?;
                if values.is_empty() {
                    return Err(ConfigError::new("omega", "diag list must not be empty"));
                }
                Operator::diag(&values)
            }
        };
        if !op.is_finite() {
            return Err(ConfigError::new("omega", "entries must be finite"));
        }
        Ok(op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessSpec {
    C1,
    C2,
}

/// `φ` on `[−2τ, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HistorySpec {
    /// `φ(t) = Σ_k c_k t^k`, one vector per power.
    Polynomial { coefficients: Vec<Vec<f64>> },
    /// `φ_i(t) = offset_i + amplitude_i · sin(frequency_i · t + phase_i)`.
    Trig {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    /// Uniform samples of `(φ, φ̇)` from `−2τ` to `0`.
    Samples {
        values: Vec<Vec<f64>>,
        derivs: Vec<Vec<f64>>,
        #[serde(default = "default_sample_smoothness")]
        smoothness: SmoothnessSpec,
    },
}

fn default_sample_smoothness() -> SmoothnessSpec {
    SmoothnessSpec::C1
}

/// `f` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    Constant {
        value: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        kinks: Vec<f64>,
    },
    Polynomial {
        coefficients: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        kinks: Vec<f64>,
    },
    Trig {
        amplitude: Vec<f64>,
        frequency: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        kinks: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub nodes_per_cell: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { scheme: Scheme::GaussLegendre, nodes_per_cell: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MildFormSpec {
    Printed,
    #[default]
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    #[serde(default)]
    pub mild_form: MildFormSpec,
}

/// Data `(x₀, x₁)` of the oscillator without delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

/// History family of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilySpec {
    /// `φ(t) = x₀ + t·x₁`.
    #[default]
    Linear,
    /// The configured history formula, restricted to `[−2τ, 0]` for each `τ`.
    Configured,
}

fn default_grid_points() -> usize {
    512
}

fn default_step_cells() -> usize {
    DEFAULT_CELLS_PER_SEGMENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub omega: OmegaSpec,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    pub horizon: f64,
    pub history: HistorySpec,
    #[serde(default = "default_forcing")]
    pub forcing: ForcingSpec,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub variant: VariantSpec,
    #[serde(default = "default_step_cells")]
    pub step_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default)]
    pub family: FamilySpec,
}

fn default_forcing() -> ForcingSpec {
    ForcingSpec::Zero
}

fn positive(field: &str, v: f64) -> ConfigResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
    }
}

fn check_len(field: &str, v: &[f64], dim: usize) -> ConfigResult<()> {
    if v.len() != dim {
        return Err(ConfigError::new(field, format!("expected {dim} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::new(field, "components must be finite"));
    }
    Ok(())
}

fn check_coefficients(field: &str, coefficients: &[Vec<f64>], dim: usize) -> ConfigResult<()> {
    if coefficients.is_empty() {
        return Err(ConfigError::new(field, "needs at least one coefficient vector"));
    }
    for (k, c) in coefficients.iter().enumerate() {
        check_len(&format!("{field}[{k}]"), c, dim)?;
    }
    Ok(())
}

/// `(p, p', p'')` of a vector polynomial.
fn polynomial(coefficients: &[Vec<f64>], t: f64) -> [Vec<f64>; 3] {
    let dim = coefficients[0].len();
    let mut out = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    for (k, c) in coefficients.iter().enumerate() {
        let kf = k as f64;
        let p0 = t.powi(k as i32);
        let p1 = if k >= 1 { kf * t.powi(k as i32 - 1) } else { 0.0 };
        let p2 = if k >= 2 { kf * (kf - 1.0) * t.powi(k as i32 - 2) } else { 0.0 };
        for i in 0..dim {
            out[0][i] += c[i] * p0;
            out[1][i] += c[i] * p1;
            out[2][i] += c[i] * p2;
        }
    }
    out
}

/// `(offset + a sin(ωt + p), its derivatives)` componentwise.
fn trig(amplitude: &[f64], frequency: &[f64], phase: &[f64], offset: &[f64], t: f64) -> [Vec<f64>; 3] {
    let n = amplitude.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let (a, w) = (amplitude[i], frequency[i]);
        let arg = w * t + phase[i];
        out[0][i] = offset[i] + a * arg.sin();
        out[1][i] = a * w * arg.cos();
        out[2][i] = -a * w * w * arg.sin();
    }
    out
}

impl HistorySpec {
    pub fn build(&self, tau: f64, dim: usize) -> ConfigResult<HistoryFunction> {
        let wrap = |e: Error| ConfigError::new("history", e.to_string());
        match self {
            Self::Polynomial { coefficients } => {
                check_coefficients("history.coefficients", coefficients, dim)?;
                let (c0, c1, c2) = (Arc::new(coefficients.clone()), Arc::new(coefficients.clone()), Arc::new(coefficients.clone()));
                HistoryFunction::analytic(
                    tau,
                    dim,
                    Arc::new(move |t| polynomial(&c0, t)[0].clone()),
                    Arc::new(move |t| polynomial(&c1, t)[1].clone()),
                    Arc::new(move |t| polynomial(&c2, t)[2].clone()),
                )
                .map_err(wrap)
            }
            Self::Trig { amplitude, frequency, phase, offset } => {
                check_len("history.amplitude", amplitude, dim)?;
                check_len("history.frequency", frequency, dim)?;
                let phase = phase.clone().unwrap_or_else(|| vec![0.0; dim]);
                let offset = offset.clone().unwrap_or_else(|| vec![0.0; dim]);
                check_len("history.phase", &phase, dim)?;
                check_len("history.offset", &offset, dim)?;
                let data = Arc::new((amplitude.clone(), frequency.clone(), phase, offset));
                let (d0, d1, d2) = (data.clone(), data.clone(), data);
                HistoryFunction::analytic(
                    tau,
                    dim,
                    Arc::new(move |t| trig(&d0.0, &d0.1, &d0.2, &d0.3, t)[0].clone()),
                    Arc::new(move |t| trig(&d1.0, &d1.1, &d1.2, &d1.3, t)[1].clone()),
                    Arc::new(move |t| trig(&d2.0, &d2.1, &d2.2, &d2.3, t)[2].clone()),
                )
                .map_err(wrap)
            }
            Self::Samples { values, derivs, smoothness } => {
                for (k, v) in values.iter().enumerate() {
                    check_len(&format!("history.values[{k}]"), v, dim)?;
                }
                for (k, v) in derivs.iter().enumerate() {
                    check_len(&format!("history.derivs[{k}]"), v, dim)?;
                }
                let smoothness = match smoothness {
                    SmoothnessSpec::C1 => Smoothness::C1,
                    SmoothnessSpec::C2 => Smoothness::C2,
                };
                HistoryFunction::sampled(tau, values.clone(), derivs.clone(), smoothness).map_err(wrap)
            }
        }
    }
}

impl ForcingSpec {
    pub fn kinks(&self) -> &[f64] {
        match self {
            Self::Zero => &[],
            Self::Constant { kinks, .. } | Self::Polynomial { kinks, .. } | Self::Trig { kinks, .. } => kinks,
        }
    }

    pub fn build(&self, dim: usize) -> ConfigResult<ForcingFunction> {
        let kinks = self.kinks().to_vec();
        if kinks.iter().any(|k| !k.is_finite()) {
            return Err(ConfigError::new("forcing.kinks", "kink times must be finite"));
        }
        let wrap = |e: Error| ConfigError::new("forcing", e.to_string());
        match self {
            Self::Zero => Ok(ForcingFunction::zero(dim)),
            Self::Constant { value, .. } => {
                check_len("forcing.value", value, dim)?;
                if kinks.is_empty() {
                    return Ok(ForcingFunction::constant(value.clone()));
                }
                let v = value.clone();
                ForcingFunction::new(dim, Arc::new(move |_| v.clone()), kinks, Continuity::C0).map_err(wrap)
            }
            Self::Polynomial { coefficients, .. } => {
                check_coefficients("forcing.coefficients", coefficients, dim)?;
                let c = coefficients.clone();
                ForcingFunction::new(dim, Arc::new(move |t| polynomial(&c, t)[0].clone()), kinks, Continuity::C0).map_err(wrap)
            }
            Self::Trig { amplitude, frequency, phase, .. } => {
                check_len("forcing.amplitude", amplitude, dim)?;
                check_len("forcing.frequency", frequency, dim)?;
                let phase = phase.clone().unwrap_or_else(|| vec![0.0; dim]);
                check_len("forcing.phase", &phase, dim)?;
                let (a, w) = (amplitude.clone(), frequency.clone());
                let zero = vec![0.0; dim];
                ForcingFunction::new(dim, Arc::new(move |t| trig(&a, &w, &phase, &zero, t)[0].clone()), kinks, Continuity::C0)
                    .map_err(wrap)
            }
        }
    }
}

fn problem_error(e: Error) -> ConfigError {
    let field = match &e {
        Error::ExcessiveHorizon { .. } => "horizon",
        Error::DimensionMismatch { .. } => "omega",
        Error::DomainError(_) => "forcing.kinks",
        _ => "scenario",
    };
    ConfigError::new(field, e.to_string())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> ConfigResult<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde names the field for missing/unknown keys; otherwise point at the location
            ConfigError::new(field_from_serde(&msg).unwrap_or_else(|| format!("line {} column {}", e.line(), e.column())), msg)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> ConfigResult<usize> {
        Ok(self.omega.to_operator()?.dim())
    }

    /// Checks every field that does not need the full problem.
    pub fn validate(&self) -> ConfigResult<()> {
        self.omega.to_operator()?;
        positive("tau", self.tau)?;
        positive("horizon", self.horizon)?;
        if let Some(tau0) = self.tau0 {
            positive("tau0", tau0)?;
        }
        if self.grid_points < 2 {
            return Err(ConfigError::new("grid_points", format!("must be at least 2, got {}", self.grid_points)));
        }
        if self.step_cells == 0 {
            return Err(ConfigError::new("step_cells", "must be positive"));
        }
        self.rule()?;
        if let Some(taus) = &self.taus {
            for (i, t) in taus.iter().enumerate() {
                positive(&format!("taus[{i}]"), *t)?;
            }
        }
        self.problem()?;
        Ok(())
    }

    pub fn operator(&self) -> ConfigResult<Operator> {
        self.omega.to_operator()
    }

    pub fn rule(&self) -> ConfigResult<QuadratureRule> {
        QuadratureRule::new(self.quadrature.scheme, self.quadrature.nodes_per_cell)
            .map_err(|e| ConfigError::new("quadrature.nodes_per_cell", e.to_string()))
    }

    pub fn mild_form(&self) -> MildForm {
        match self.variant.mild_form {
            MildFormSpec::Printed => MildForm::Printed,
            MildFormSpec::Derived => MildForm::Derived,
        }
    }

    pub fn history_at(&self, tau: f64) -> ConfigResult<HistoryFunction> {
        self.history.build(tau, self.dim()?)
    }

    pub fn forcing(&self) -> ConfigResult<ForcingFunction> {
        self.forcing.build(self.dim()?)
    }

    /// The delay problem with the configured `τ` and horizon.
    pub fn problem(&self) -> ConfigResult<DelayProblem> {
        self.problem_with_horizon(self.horizon)
    }

    pub fn problem_with_horizon(&self, horizon: f64) -> ConfigResult<DelayProblem> {
        let omega = self.operator()?;
        let history = self.history_at(self.tau)?;
        let forcing = self.forcing()?;
        DelayProblem::new(omega, self.tau, history, forcing, horizon).map_err(problem_error)
    }

    /// `(x₀, x₁)`: the `initial` block, or `(φ(0), φ̇(0))`.
    pub fn initial_data(&self) -> ConfigResult<(Vec<f64>, Vec<f64>)> {
        let dim = self.dim()?;
        match &self.initial {
            Some(init) => {
                check_len("initial.x0", &init.x0, dim)?;
                check_len("initial.x1", &init.x1, dim)?;
                Ok((init.x0.clone(), init.x1.clone()))
            }
            None => {
                let h = self.history_at(self.tau)?;
                let wrap = |e: Error| ConfigError::new("history", e.to_string());
                Ok((h.value(0.0).map_err(wrap)?, h.deriv1(0.0).map_err(wrap)?))
            }
        }
    }

    /// The oscillator without delay sharing `Ω`, `f` and the horizon.
    pub fn classical_problem(&self) -> ConfigResult<ClassicalProblem> {
        let (x0, x1) = self.initial_data()?;
        ClassicalProblem::new(self.operator()?, x0, x1, self.forcing()?, self.horizon)
            .map_err(|e| ConfigError::new("initial", e.to_string()))
    }

    pub fn history_family(&self) -> ConfigResult<HistoryFamily> {
        match self.family {
            FamilySpec::Linear => Ok(HistoryFamily::LinearConsistent),
            FamilySpec::Configured => {
                if matches!(self.history, HistorySpec::Samples { .. }) {
                    return Err(ConfigError::new("family", "sampled histories cannot be rebuilt for other tau values"));
                }
                let spec = self.history.clone();
                let dim = self.dim()?;
                Ok(HistoryFamily::Custom(Arc::new(move |tau| {
                    spec.build(tau, dim).map_err(|e| Error::InvalidParameter(e.to_string()))
                })))
            }
        }
    }
}

fn field_from_serde(msg: &str) -> Option<String> {
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            return rest.split('`').next().map(str::to_string);
        }
    }
    None
}

/// Random but reproducible scenarios with `‖Ω‖ ≤ 2` and smooth data.
pub fn generate_scenario(seed: u64, dim: usize) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = dim.max(1);
    let entries: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let frob = entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if frob > 0.0 { rng.gen_range(0.2..2.0) / frob } else { 0.0 };
    let omega: Vec<Vec<f64>> = entries.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let tau = [0.25, 0.5, 1.0][rng.gen_range(0..3)];
    let mut vector = |lo: f64, hi: f64| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(lo..hi)).collect() };
    let history = if seed.is_multiple_of(2) {
        HistorySpec::Polynomial { coefficients: vec![vector(-1.0, 1.0), vector(-1.0, 1.0), vector(-0.5, 0.5)] }
    } else {
        HistorySpec::Trig {
            amplitude: vector(-1.0, 1.0),
            frequency: vector(0.5, 2.0),
            phase: Some(vector(-1.0, 1.0)),
            offset: Some(vector(-0.5, 0.5)),
        }
    };
    let forcing = match seed % 3 {
        0 => ForcingSpec::Zero,
        1 => ForcingSpec::Constant { value: vector(-1.0, 1.0), kinks: vec![] },
        _ => ForcingSpec::Trig { amplitude: vector(-1.0, 1.0), frequency: vector(0.5, 3.0), phase: None, kinks: vec![] },
    };
    ScenarioConfig {
        omega: OmegaSpec::Matrix(omega),
        tau,
        tau0: Some(1.0),
        horizon: 10.0 * tau,
        history,
        forcing,
        grid_points: 256,
        quadrature: QuadratureSpec::default(),
        variant: VariantSpec::default(),
        step_cells: DEFAULT_CELLS_PER_SEGMENT,
        initial: None,
        taus: None,
        family: FamilySpec::Linear,
    }
}
