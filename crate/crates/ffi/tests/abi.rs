use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use delayosc_ffi::*;

fn last_error() -> String {
    let p = delayosc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn evaluator(omega: &[f64], dim: usize, tau: f64) -> *mut DelayoscEvaluator {
    let mut ev = ptr::null_mut();
    let status = unsafe { delayosc_evaluator_new(omega.as_ptr(), dim, tau, &mut ev) };
    assert_eq!(status, DelayoscStatus::Ok);
    ev
}

const SCENARIO: &str = r#"{
  "omega": [[1.0]],
  "tau": 0.5,
  "horizon": 3.0,
  "history": { "kind": "polynomial", "coefficients": [[1.0], [0.5]] },
  "forcing": { "kind": "zero" }
}"#;

#[test]
fn scalar_delayed_exponential_values() {
    let ev = evaluator(&[1.0], 1, 1.0);
    let mut out = [0.0];
    unsafe {
        assert_eq!(delayosc_evaluator_dim(ev), 1);
        assert_eq!(delayosc_delayed_exp(ev, 0.5, DelayoscSign::Plus, out.as_mut_ptr(), 1), DelayoscStatus::Ok);
        assert!((out[0] - 1.5).abs() < 1e-15);
        assert_eq!(delayosc_delayed_exp(ev, 1.5, DelayoscSign::Plus, out.as_mut_ptr(), 1), DelayoscStatus::Ok);
        assert!((out[0] - 2.625).abs() < 1e-14);
        assert_eq!(delayosc_fundamental_x2(ev, 0.5, 0, out.as_mut_ptr(), 1), DelayoscStatus::Ok);
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert_eq!(delayosc_fundamental_x1(ev, 0.5, 1, out.as_mut_ptr(), 1), DelayoscStatus::Ok);
        delayosc_evaluator_free(ev);
    }
    assert!(delayosc_last_error().is_null());
}

#[test]
fn matrix_output_is_row_major() {
    let ev = evaluator(&[0.0, 1.0, 0.0, 0.0], 2, 1.0);
    let mut out = [0.0; 4];
    unsafe {
        assert_eq!(delayosc_delayed_exp(ev, 0.5, DelayoscSign::Plus, out.as_mut_ptr(), 4), DelayoscStatus::Ok);
        delayosc_evaluator_free(ev);
    }
    assert_eq!(out, [1.0, 0.5, 0.0, 1.0]);
}

#[test]
fn errors_carry_status_and_message() {
    let mut ev = ptr::null_mut();
    let status = unsafe { delayosc_evaluator_new([1.0].as_ptr(), 1, -1.0, &mut ev) };
    assert_eq!(status, DelayoscStatus::InvalidArgument);
    assert!(last_error().contains("tau"));
    assert!(ev.is_null());

    let status = unsafe { delayosc_evaluator_new(ptr::null(), 1, 1.0, &mut ev) };
    assert_eq!(status, DelayoscStatus::NullPointer);

    let ev = evaluator(&[1.0, 0.0, 0.0, 1.0], 2, 1.0);
    let mut small = [0.0; 3];
    unsafe {
        let status = delayosc_delayed_exp(ev, 0.5, DelayoscSign::Plus, small.as_mut_ptr(), 3);
        assert_eq!(status, DelayoscStatus::BufferTooSmall);
        assert_eq!(delayosc_delayed_exp(ptr::null(), 0.5, DelayoscSign::Plus, small.as_mut_ptr(), 3), DelayoscStatus::NullPointer);
        delayosc_evaluator_free(ev);
        delayosc_evaluator_free(ptr::null_mut());
    }
}

#[test]
fn solver_sources_agree() {
    let json = CString::new(SCENARIO).unwrap();
    let mut solver = ptr::null_mut();
    unsafe {
        assert_eq!(delayosc_solver_from_json(json.as_ptr(), &mut solver), DelayoscStatus::Ok);
        assert_eq!(delayosc_solver_dim(solver), 1);
        for t in [-1.0, -0.3, 0.0, 0.7, 1.9, 3.0] {
            let mut x = [[0.0]; 3];
            for (k, source) in [DelayoscSource::ClosedForm, DelayoscSource::MildForm, DelayoscSource::StepOracle].into_iter().enumerate() {
                assert_eq!(delayosc_solve(solver, source, t, x[k].as_mut_ptr(), 1), DelayoscStatus::Ok, "{}", last_error());
            }
            assert!((x[0][0] - x[1][0]).abs() < 1e-9 && (x[0][0] - x[2][0]).abs() < 1e-8, "t={t}: {x:?}");
            let mut v = [0.0];
            assert_eq!(delayosc_solve_derivative(solver, DelayoscSource::ClosedForm, t, v.as_mut_ptr(), 1), DelayoscStatus::Ok);
        }
        let mut x = [0.0];
        assert_eq!(delayosc_solve(solver, DelayoscSource::ClosedForm, 10.0, x.as_mut_ptr(), 1), DelayoscStatus::InvalidArgument);
        delayosc_solver_free(solver);
    }
}

#[test]
fn bad_json_is_a_config_error() {
    let json = CString::new(r#"{"omega": [[1.0]], "tau": -1}"#).unwrap();
    let mut solver = ptr::null_mut();
    let status = unsafe { delayosc_solver_from_json(json.as_ptr(), &mut solver) };
    assert_eq!(status, DelayoscStatus::ConfigError);
    assert!(solver.is_null());
    assert!(last_error().starts_with("invalid config"));
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(delayosc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/delayosc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["delayosc_evaluator_new", "delayosc_solver_from_json", "delayosc_last_error", "DELAYOSC_STATUS_BUFFER_TOO_SMALL"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    for lang in ["c", "c++"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
            .expect("a C compiler on PATH");
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
