mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn delayosc(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_delayosc"));
    cmd.args(args).env_remove("DELAYOSC_OUTPUT_DIR");
    if let Some(dir) = env_dir {
        cmd.env("DELAYOSC_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> std::path::PathBuf {
    let text = std::fs::read_to_string(fixture("scalar_forced.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    edit(&mut value);
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

#[test]
fn solve_writes_every_requested_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.csv");
    let cfg = fixture("scalar_forced.json");
    let res = delayosc(
        &["solve", "--config", path_str(&cfg), "--output", path_str(&out), "--sources", "closed_form,mild_form,step_oracle,classical"],
        None,
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    for source in ["closed_form", "mild_form", "step_oracle", "classical"] {
        assert!(csv.contains(source), "missing {source}");
    }
}

#[test]
fn negative_tau_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", |v| v["tau"] = serde_json::json!(-1.0));
    let out = dir.path().join("o.csv");
    let res = delayosc(&["solve", "--config", path_str(&cfg), "--output", path_str(&out)], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("tau"), "{}", stderr(&res));
    assert!(!out.exists());
}

#[test]
fn unreadable_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("o.csv");
    let res = delayosc(&["solve", "--config", path_str(&missing), "--output", path_str(&out)], None);
    assert_eq!(res.status.code(), Some(1), "{}", stderr(&res));
}

#[test]
fn bounds_requires_tau0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_tau0.json", |v| {
        v.as_object_mut().unwrap().remove("tau0");
    });
    let out = dir.path().join("b.csv");
    let res = delayosc(&["bounds", "--config", path_str(&cfg), "--output", path_str(&out)], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("tau0"), "{}", stderr(&res));
}

#[test]
fn bounds_reports_checks_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let res = delayosc(&["bounds", "--config", path_str(&fixture("scalar_forced.json")), "--output", path_str(&out)], None);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check,tau,param,observed,bound,satisfied"));
    let rows: Vec<&str> = lines.collect();
    for check in ["lemma", "corollary", "apriori"] {
        assert!(rows.iter().any(|r| r.starts_with(check)), "no {check} row");
    }
    for constant in ["alpha", "beta", "delta", "kappa"] {
        assert!(rows.iter().any(|r| r.starts_with(constant)), "no {constant} row");
    }
    assert!(rows.iter().filter(|r| r.split(',').count() == 6).count() == rows.len());
}

#[test]
fn solve_bounds_rejects_singular_omega() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let bounds = dir.path().join("k.csv");
    let res = delayosc(
        &[
            "solve",
            "--config",
            path_str(&fixture("zero_omega.json")),
            "--output",
            path_str(&out),
            "--bounds",
            path_str(&bounds),
        ],
        None,
    );
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr(&res).contains("SingularOperator"), "{}", stderr(&res));
}

#[test]
fn dexp_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let res = delayosc(
        &["dexp", "--omega", "[[0, 1], [-1, 0]]", "--tau", "0.5", "--t-min", "-1", "--t-max", "4", "--samples", "41", "--output", path_str(&out)],
        None,
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 42);
    assert_eq!(lines[0].split(',').count(), 1 + 3 * 4);
    assert!(lines[0].starts_with("t,exp_"));
}

#[test]
fn dexp_rejects_reversed_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let res = delayosc(&["dexp", "--omega", "1", "--tau", "0.5", "--t-min", "2", "--t-max", "1", "--output", path_str(&out)], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn convergence_needs_three_taus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let cfg = fixture("convergence_scalar.json");
    let res = delayosc(&["convergence", "--config", path_str(&cfg), "--taus", "0.1", "--output", path_str(&out)], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("need at least 3"), "{}", stderr(&res));
}

#[test]
fn convergence_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let res = delayosc(&["convergence", "--config", path_str(&fixture("convergence_scalar.json")), "--output", path_str(&out)], None);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    let last = csv.lines().last().unwrap();
    let slope: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(last.starts_with("fitted_slope,") && slope > 0.9, "{last}");
}

#[test]
fn zero_omega_convergence_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let res = delayosc(&["convergence", "--config", path_str(&fixture("zero_omega.json")), "--output", path_str(&out)], None);
    assert!(res.status.success(), "{}", stderr(&res));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("fitted_slope,ExactAgreement"), "{csv}");
}

#[test]
fn relative_outputs_follow_the_output_dir_variable() {
    let dir = tempfile::tempdir().unwrap();
    let res = delayosc(&["generate", "--seed", "7", "--dim", "2", "--output", "scenario.json"], Some(dir.path()));
    assert!(res.status.success(), "{}", stderr(&res));
    let written = dir.path().join("scenario.json");
    let cfg = delayosc::ScenarioConfig::from_json(&std::fs::read_to_string(&written).unwrap()).unwrap();
    assert_eq!(cfg, delayosc::config::generate_scenario(7, 2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let res = delayosc(&["integrate"], None);
    assert_eq!(res.status.code(), Some(2));
}
