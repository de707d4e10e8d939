//! The `delayosc` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments or config,
//! 3 solver error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analysis::{bounds_report, solution_convergence_study, BoundsConstants, StudySettings};
use crate::classical::ClassicalProblem;
use crate::config::{ConfigError, OmegaSpec, ScenarioConfig};
use crate::dexp::{DelayedExpEvaluator, Sign};
use crate::error::Error;
use crate::linalg::Operator;
use crate::problem::DelayProblem;
use crate::solver::{DelaySolver, Representation};
use crate::steps::StepSolution;

/// Environment variable that redirects relative output paths.
pub const OUTPUT_DIR_ENV: &str = "DELAYOSC_OUTPUT_DIR";

const CONFIG_HELP: &str = "\
Config file (JSON):
  omega         matrix rows [[..],[..]] or \"diag:[a, b, ...]\"
  tau           delay parameter, the equation delay is 2*tau (> 0)
  tau0          upper bound on tau for the error bounds (> 0; needed by `bounds`, `solve --bounds`)
  horizon       final time T (> 0, at most 254*tau)
  history       {\"kind\": \"polynomial\", \"coefficients\": [c0, c1, ...]}  phi(t) = sum c_k t^k
                {\"kind\": \"trig\", \"amplitude\": a, \"frequency\": w, \"phase\": p, \"offset\": o}
                    phi_i(t) = o_i + a_i sin(w_i t + p_i)
                {\"kind\": \"samples\", \"values\": [..], \"derivs\": [..], \"smoothness\": \"c1\"|\"c2\"}
                    (phi, phi') on a uniform grid from -2*tau to 0, at least 5 points, spacing <= tau/2
  forcing       {\"kind\": \"zero\"}
                {\"kind\": \"constant\", \"value\": v}
                {\"kind\": \"polynomial\", \"coefficients\": [c0, c1, ...]}
                {\"kind\": \"trig\", \"amplitude\": a, \"frequency\": w, \"phase\": p}
                every kind but zero takes \"kinks\": [t, ...] within [0, T]
  grid_points   uniform output/sup-norm grid size, default 512 (multiples of tau are always added)
  quadrature    {\"scheme\": \"gauss-legendre\"|\"simpson\", \"nodes_per_cell\": 2..64}, default gauss-legendre/8
  variant       {\"mild_form\": \"derived\"|\"printed\"}, default derived
  step_cells    grid cells per 2*tau segment of the step oracle, default 512
  initial       {\"x0\": [..], \"x1\": [..]} data of the delay-free oscillator, default (phi(0), phi'(0))
  taus          tau values for `convergence` when --taus is absent
  family        convergence history family: \"linear\" (phi = x0 + t x1, default) or \"configured\"";

#[derive(Debug, Parser)]
#[command(name = "delayosc", version, about = "Linear oscillator with pure delay: x'' - Omega^2 x(t - 2 tau) = f(t)")]
#[command(after_long_help = CONFIG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the solution of a scenario
    #[command(after_long_help = CONFIG_HELP)]
    Solve(SolveArgs),
    /// Tabulate exp_tau, x1_tau and x2_tau
    Dexp(DexpArgs),
    /// Check the lemma, corollary and a priori bounds for a scenario
    #[command(after_long_help = CONFIG_HELP)]
    Bounds(BoundsArgs),
    /// Convergence of the delay solution to the delay-free one as tau -> 0
    #[command(after_long_help = CONFIG_HELP)]
    Convergence(ConvergenceArgs),
    /// Write a random reproducible scenario config
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    MildForm,
    StepOracle,
    Classical,
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::MildForm => "mild_form",
            Self::StepOracle => "step_oracle",
            Self::Classical => "classical",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated list of sources
    #[arg(long, value_delimiter = ',', default_value = "closed_form")]
    pub sources: Vec<Source>,
    /// Also write alpha, beta, delta, kappa to this file (needs tau0 and an invertible omega)
    #[arg(long)]
    pub bounds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DexpArgs {
    /// Matrix literal, "diag:[...]" or a number
    #[arg(long, allow_hyphen_values = true)]
    pub omega: String,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: f64,
    #[arg(long, default_value_t = 501)]
    pub samples: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated tau values; overrides `taus` in the config
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Usage(String),
    Solver(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Usage(m) => write!(f, "invalid arguments: {m}"),
            Self::Solver(e) => write!(f, "solver error: {e}"),
            Self::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Solver(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Dexp(a) => cmd_dexp(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn load_config(path: &Path) -> CliResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

/// Applies the output-directory override to relative paths.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let path = resolve_output(path);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

/// Uniform points of `[a, b]` merged with the multiples of `tau` in between.
pub fn output_grid(a: f64, b: f64, points: usize, tau: f64) -> Vec<f64> {
    crate::analysis::sup_grid(a, b, points, tau)
}

/// The trajectory CSV header `t,x_1..x_n,dx_1..dx_n,source`.
pub fn trajectory_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend((1..=dim).map(|i| format!("dx_{i}")));
    cols.push("source".into());
    cols.join(",")
}

/// `(t, x(t), ẋ(t))`
type Row = (f64, Vec<f64>, Vec<f64>);

fn rows_for<F>(grid: &[f64], eval: F) -> CliResult<Vec<Row>>
where
    F: Fn(f64) -> crate::error::Result<(Vec<f64>, Vec<f64>)> + Sync,
{
    grid.par_iter()
        .map(|&t| eval(t).map(|(x, v)| (t, x, v)))
        .collect::<crate::error::Result<Vec<_>>>()
        .map_err(CliError::from)
}

/// The CSV that `solve` writes, as a string.
pub fn solve_csv(config: &ScenarioConfig, sources: &[Source]) -> CliResult<String> {
    let problem = config.problem()?;
    let rule = config.rule()?;
    let tau = problem.tau();
    let horizon = problem.horizon();
    let dim = problem.dim();
    let full = output_grid(-2.0 * tau, horizon, config.grid_points, tau);

    let mut out = String::new();
    out.push_str(&trajectory_header(dim));
    out.push('\n');
    for source in sources {
        let rows = match source {
            Source::ClosedForm | Source::MildForm => {
                let solver = DelaySolver::with_rule(problem.clone(), rule.clone())?.with_mild_form(config.mild_form());
                let rep = if *source == Source::ClosedForm { Representation::Classical } else { Representation::Mild };
                let path = solver.trajectory(rep);
                rows_for(&full, |t| Ok((path.value(t)?, path.deriv(t)?)))?
            }
            Source::StepOracle => {
                // whole segments only: extend to the next multiple of 2τ
                let segments = (horizon / (2.0 * tau) * (1.0 - 1e-12)).ceil().max(1.0);
                let extended = config.problem_with_horizon((segments * 2.0 * tau).max(horizon))?;
                let steps = StepSolution::solve(&extended, 2.0 * tau / config.step_cells as f64)?;
                rows_for(&full, |t| Ok((steps.value_at(t)?, steps.deriv_at(t)?)))?
            }
            Source::Classical => {
                let classical: ClassicalProblem = config.classical_problem()?;
                let grid: Vec<f64> = full.iter().copied().filter(|t| *t >= 0.0).collect();
                rows_for(&grid, |t| classical.state(t, &rule))?
            }
        };
        for (t, x, v) in rows {
            push_row(
                &mut out,
                std::iter::once(fmt_f64(t))
                    .chain(x.iter().map(|v| fmt_f64(*v)))
                    .chain(v.iter().map(|v| fmt_f64(*v)))
                    .chain(std::iter::once(source.name().to_string())),
            );
        }
    }
    Ok(out)
}

fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let config = load_config(&args.config)?;
    if args.sources.is_empty() {
        return Err(CliError::Usage("--sources must name at least one source".into()));
    }
    let bounds = match &args.bounds {
        Some(path) => {
            let tau0 = config.tau0.ok_or_else(|| ConfigError::new("tau0", "required when bounds are requested"))?;
            let problem = config.problem()?;
            let c = BoundsConstants::new(problem.omega(), problem.tau(), tau0, problem.horizon())?;
            Some((path, constants_csv(&c)))
        }
        None => None,
    };
    let csv = solve_csv(&config, &args.sources)?;
    write_atomic(&args.output, &csv)?;
    if let Some((path, text)) = bounds {
        write_atomic(path, &text)?;
    }
    Ok(())
}

fn constants_csv(c: &BoundsConstants) -> String {
    let mut out = String::from("constant,value\n");
    for (name, v) in [
        ("alpha", c.alpha),
        ("beta", c.beta),
        ("delta", c.delta),
        ("kappa", c.kappa),
        ("tau", c.tau),
        ("tau0", c.tau0),
        ("horizon", c.horizon),
        ("omega_norm", c.omega_norm),
        ("omega_inverse_norm", c.inverse_norm),
    ] {
        let _ = writeln!(out, "{name},{}", fmt_f64(v));
    }
    out
}

/// The CSV that `dexp` writes, as a string.
pub fn dexp_csv(omega: &Operator, tau: f64, t_min: f64, t_max: f64, samples: usize) -> CliResult<String> {
    if !(t_min.is_finite() && t_max.is_finite()) {
        return Err(CliError::Usage("t-min and t-max must be finite".into()));
    }
    if t_min > t_max {
        return Err(CliError::Usage(format!("t-min ({t_min}) exceeds t-max ({t_max})")));
    }
    if samples < 2 && t_min < t_max {
        return Err(CliError::Usage("samples must be at least 2".into()));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(CliError::Config(ConfigError::new("tau", format!("must be positive and finite, got {tau}"))));
    }
    let ev = DelayedExpEvaluator::new(omega.clone(), tau)?;
    let n = omega.dim();
    let mut cols = vec!["t".to_string()];
    for name in ["exp", "x1", "x2"] {
        for i in 1..=n {
            for j in 1..=n {
                cols.push(format!("{name}_{i}{j}"));
            }
        }
    }
    let count = samples.max(1);
    let ts: Vec<f64> = (0..count)
        .map(|k| if count == 1 { t_min } else { t_min + (t_max - t_min) * k as f64 / (count - 1) as f64 })
        .collect();
    let rows = ts
        .par_iter()
        .map(|&t| {
            let e = ev.delayed_exp(t, Sign::Plus)?;
            let x1 = ev.fundamental_x1(t)?;
            let x2 = ev.fundamental_x2(t)?;
            let mut fields = vec![fmt_f64(t)];
            for m in [&e, &x1, &x2] {
                fields.extend(m.entries().iter().map(|v| fmt_f64(*v)));
            }
            Ok(fields.join(","))
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let mut out = cols.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

fn cmd_dexp(args: &DexpArgs) -> CliResult<()> {
    let omega = OmegaSpec::parse(&args.omega)?.to_operator()?;
    let csv = dexp_csv(&omega, args.tau, args.t_min, args.t_max, args.samples)?;
    write_atomic(&args.output, &csv)
}

/// The CSV that `bounds` writes, as a string.
pub fn bounds_csv(config: &ScenarioConfig) -> CliResult<String> {
    let tau0 = config.tau0.ok_or_else(|| ConfigError::new("tau0", "required by the bounds command"))?;
    if config.tau > tau0 {
        return Err(ConfigError::new("tau0", format!("tau = {} exceeds tau0 = {tau0}", config.tau)).into());
    }
    if config.grid_points < crate::analysis::MIN_LEMMA_GRID {
        return Err(ConfigError::new("grid_points", format!("bounds need at least {}", crate::analysis::MIN_LEMMA_GRID)).into());
    }
    let problem: DelayProblem = config.problem()?;
    let report = bounds_report(&problem, tau0, config.grid_points, config.step_cells, &config.rule()?)?;
    let mut out = String::from("check,tau,param,observed,bound,satisfied\n");
    for r in &report.rows {
        push_row(
            &mut out,
            [
                r.check.name().to_string(),
                fmt_f64(r.tau),
                fmt_f64(r.param),
                fmt_f64(r.observed),
                fmt_f64(r.bound),
                r.satisfied.to_string(),
            ],
        );
    }
    let c = &report.constants;
    for (name, v) in [("alpha", c.alpha), ("beta", c.beta), ("delta", c.delta), ("kappa", c.kappa)] {
        push_row(&mut out, [name.to_string(), fmt_f64(v), String::new(), String::new(), String::new(), String::new()]);
    }
    Ok(out)
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<()> {
    let config = load_config(&args.config)?;
    let csv = bounds_csv(&config)?;
    write_atomic(&args.output, &csv)
}

/// The CSV that `convergence` writes, as a string.
pub fn convergence_csv(config: &ScenarioConfig, taus: Option<&[f64]>) -> CliResult<String> {
    let taus: Vec<f64> = match taus.or(config.taus.as_deref()) {
        Some(t) => t.to_vec(),
        None => return Err(ConfigError::new("taus", "give --taus or a `taus` list in the config").into()),
    };
    if taus.len() < 3 {
        return Err(CliError::Usage(format!("need at least 3 tau values for slope, got {}", taus.len())));
    }
    for (i, t) in taus.iter().enumerate() {
        if !(t.is_finite() && *t > 0.0) {
            return Err(ConfigError::new(format!("taus[{i}]"), format!("must be positive, got {t}")).into());
        }
    }
    let largest = taus.iter().copied().fold(0.0, f64::max);
    let tau0 = config.tau0.unwrap_or(largest);
    if largest > tau0 {
        return Err(ConfigError::new("tau0", format!("tau = {largest} exceeds tau0 = {tau0}")).into());
    }
    let base = config.classical_problem()?;
    let settings = StudySettings { tau0, grid: config.grid_points, rule: config.rule()?, mild_form: config.mild_form() };
    let table = solution_convergence_study(&base, &taus, &config.history_family()?, &settings)?;
    let mut out = String::from("tau,c0_error,c1_error,c0_bound,c1_bound,satisfied\n");
    for r in &table.rows {
        push_row(
            &mut out,
            [
                fmt_f64(r.tau),
                fmt_f64(r.c0_error),
                fmt_f64(r.c1_error),
                fmt_f64(r.c0_bound),
                fmt_f64(r.c1_bound),
                r.satisfied.to_string(),
            ],
        );
    }
    push_row(
        &mut out,
        ["fitted_slope".to_string(), table.fitted_slope.to_string(), String::new(), String::new(), String::new(), String::new()],
    );
    Ok(out)
}

fn cmd_convergence(args: &ConvergenceArgs) -> CliResult<()> {
    let config = load_config(&args.config)?;
    let csv = convergence_csv(&config, args.taus.as_deref())?;
    write_atomic(&args.output, &csv)
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    if args.dim == 0 {
        return Err(CliError::Usage("dim must be positive".into()));
    }
    let config = crate::config::generate_scenario(args.seed, args.dim);
    let mut text = config.to_json();
    text.push('\n');
    write_atomic(&args.output, &text)
}
