//! C ABI for `delayosc`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` functions
//! and released by the matching `*_free`. Every fallible call returns a
//! [`DelayoscStatus`]; on failure `delayosc_last_error` describes what went
//! wrong on the calling thread. Results are written into caller-owned
//! buffers whose length is passed alongside.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use delayosc::{DelaySolver, DelayedExpEvaluator, Error, Operator, ScenarioConfig, Sign, StepSolution};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayoscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    SolverError = 4,
    SingularOperator = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayoscSign {
    Plus = 0,
    Minus = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayoscSource {
    ClosedForm = 0,
    MildForm = 1,
    StepOracle = 2,
}

/// Evaluator for the delayed exponential and the fundamental solutions.
pub struct DelayoscEvaluator {
    inner: DelayedExpEvaluator,
}

/// A solver built from a JSON scenario.
pub struct DelayoscSolver {
    solver: DelaySolver,
    steps: Option<StepSolution>,
}

impl DelayoscSolver {
    fn steps(&mut self) -> Result<&StepSolution, Failure> {
        if self.steps.is_none() {
            let p = self.solver.problem();
            let h = 2.0 * p.tau() / delayosc::steps::DEFAULT_CELLS_PER_SEGMENT as f64;
            self.steps = Some(StepSolution::solve(p, h)?);
        }
        Ok(self.steps.as_ref().expect("built above"))
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DelayoscStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::SingularOperator { .. } => DelayoscStatus::SingularOperator,
            Error::NonFiniteInput(_)
            | Error::InvalidInterval { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::DomainError(_)
            | Error::OutOfHorizon { .. }
            | Error::ExcessiveHorizon { .. } => DelayoscStatus::InvalidArgument,
            _ => DelayoscStatus::SolverError,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DelayoscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DelayoscStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DelayoscStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DelayoscStatus::NullPointer, format!("{what} is null"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < values.len() {
        return Err(Failure(DelayoscStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn delayosc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn delayosc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an evaluator for the `dim × dim` operator `omega` (row-major) and delay `tau`.
///
/// # Safety
/// `omega` must point to `dim * dim` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn delayosc_evaluator_new(
    omega: *const f64,
    dim: usize,
    tau: f64,
    out: *mut *mut DelayoscEvaluator,
) -> DelayoscStatus {
    guard(|| {
        if omega.is_null() {
            return Err(null("omega"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let entries = std::slice::from_raw_parts(omega, dim.checked_mul(dim).ok_or_else(|| Failure(DelayoscStatus::InvalidArgument, format!("dim {dim} too large")))?).to_vec();
        let op = Operator::from_row_major(dim, entries)?;
        let inner = DelayedExpEvaluator::new(op, tau)?;
        *out = Box::into_raw(Box::new(DelayoscEvaluator { inner }));
        Ok(())
    })
}

/// # Safety
/// `ev` must be null or a handle from `delayosc_evaluator_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn delayosc_evaluator_free(ev: *mut DelayoscEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Dimension of the operator, 0 for a null handle.
///
/// # Safety
/// `ev` must be null or a live evaluator handle.
#[no_mangle]
pub unsafe extern "C" fn delayosc_evaluator_dim(ev: *const DelayoscEvaluator) -> usize {
    ev.as_ref().map_or(0, |e| e.inner.dim())
}

unsafe fn eval_matrix(
    ev: *const DelayoscEvaluator,
    out: *mut f64,
    len: usize,
    f: impl FnOnce(&DelayedExpEvaluator) -> delayosc::Result<Operator>,
) -> DelayoscStatus {
    guard(|| {
        let ev = handle(ev, "evaluator")?;
        let m = f(&ev.inner)?;
        write_out(m.entries(), out, len)
    })
}

/// Writes `exp_τ(t; ±Ω)` row-major into `out[0..dim*dim]`.
///
/// # Safety
/// `ev` must be a live evaluator handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn delayosc_delayed_exp(
    ev: *const DelayoscEvaluator,
    t: f64,
    sign: DelayoscSign,
    out: *mut f64,
    len: usize,
) -> DelayoscStatus {
    let sign = match sign {
        DelayoscSign::Plus => Sign::Plus,
        DelayoscSign::Minus => Sign::Minus,
    };
    eval_matrix(ev, out, len, |e| e.delayed_exp(t, sign))
}

/// Writes the `order`-th derivative (0, 1 or 2) of `x¹_τ(t)` into `out`.
///
/// # Safety
/// `ev` must be a live evaluator handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn delayosc_fundamental_x1(
    ev: *const DelayoscEvaluator,
    t: f64,
    order: u32,
    out: *mut f64,
    len: usize,
) -> DelayoscStatus {
    eval_matrix(ev, out, len, |e| if order == 0 { e.fundamental_x1(t) } else { e.fundamental_x1_derivative(t, order as usize) })
}

/// Writes the `order`-th derivative (0, 1 or 2) of `x²_τ(t)` into `out`.
///
/// # Safety
/// `ev` must be a live evaluator handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn delayosc_fundamental_x2(
    ev: *const DelayoscEvaluator,
    t: f64,
    order: u32,
    out: *mut f64,
    len: usize,
) -> DelayoscStatus {
    eval_matrix(ev, out, len, |e| if order == 0 { e.fundamental_x2(t) } else { e.fundamental_x2_derivative(t, order as usize) })
}

/// Parses a JSON scenario and builds a solver for it.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn delayosc_solver_from_json(json: *const c_char, out: *mut *mut DelayoscSolver) -> DelayoscStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(DelayoscStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let config_err = |e: delayosc::ConfigError| Failure(DelayoscStatus::ConfigError, e.to_string());
        let cfg = ScenarioConfig::from_json(text).map_err(config_err)?;
        let problem = cfg.problem().map_err(config_err)?;
        let solver = DelaySolver::with_rule(problem, cfg.rule().map_err(config_err)?)?.with_mild_form(cfg.mild_form());
        *out = Box::into_raw(Box::new(DelayoscSolver { solver, steps: None }));
        Ok(())
    })
}

/// # Safety
/// `solver` must be null or a handle from `delayosc_solver_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn delayosc_solver_free(solver: *mut DelayoscSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// State dimension, 0 for a null handle.
///
/// # Safety
/// `solver` must be null or a live solver handle.
#[no_mangle]
pub unsafe extern "C" fn delayosc_solver_dim(solver: *const DelayoscSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.solver.problem().dim())
}

/// Writes `x(t)` from the chosen source into `out[0..dim]`. The step oracle
/// is integrated on first use with 512 cells per segment and covers whole
/// segments of length `2τ` inside the horizon.
///
/// # Safety
/// `solver` must be a live solver handle, not used concurrently, and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn delayosc_solve(
    solver: *mut DelayoscSolver,
    source: DelayoscSource,
    t: f64,
    out: *mut f64,
    len: usize,
) -> DelayoscStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        let x = match source {
            DelayoscSource::ClosedForm => s.solver.solve_classical(t)?,
            DelayoscSource::MildForm => s.solver.solve_mild(t)?,
            DelayoscSource::StepOracle => s.steps()?.value_at(t)?,
        };
        write_out(&x, out, len)
    })
}

/// Writes `ẋ(t)` from the chosen source into `out[0..dim]`.
///
/// # Safety
/// Same contract as `delayosc_solve`.
#[no_mangle]
pub unsafe extern "C" fn delayosc_solve_derivative(
    solver: *mut DelayoscSolver,
    source: DelayoscSource,
    t: f64,
    out: *mut f64,
    len: usize,
) -> DelayoscStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        let v = match source {
            DelayoscSource::ClosedForm => s.solver.classical_derivative(t)?,
            DelayoscSource::MildForm => s.solver.mild_derivative(t)?,
            DelayoscSource::StepOracle => s.steps()?.deriv_at(t)?,
        };
        write_out(&v, out, len)
    })
}
