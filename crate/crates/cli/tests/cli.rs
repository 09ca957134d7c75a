use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use equilib_cli::output::{ErrorObject, RunResult};
use equilib_cli::problem::Problem;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equilib"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_problem(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn result(out: &Output) -> RunResult {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn trivial_line() -> Value {
    json!({
        "window": [0.0, 1.0, 2.0, 3.0, 4.0],
        "left_tail": {"kind": "arithmetic", "first": -1.0, "gap": 1.0},
        "right_tail": {"kind": "arithmetic", "first": 5.0, "gap": 1.0}
    })
}

#[test]
fn circle_of_four_is_square() {
    let out = run(&["solve-circle", "--n", "4", "--law", "inverse_power:2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = result(&out);
    assert!(r.converged);
    let angles: Vec<f64> = serde_json::from_value(r.output["config"]["angles"].clone()).unwrap();
    for (k, a) in angles.iter().enumerate() {
        assert!((a - k as f64 * PI / 2.0).abs() < 1e-8, "{angles:?}");
    }
    assert!(r.residual_report.unwrap().max_abs_net < 1e-10);
}

#[test]
fn trivial_gap_certificate_is_inapplicable() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(
        dir.path(),
        "p.json",
        &json!({"schema_version": 1, "task": "certify-gap", "law": "coulomb", "config": trivial_line()}),
    );
    let out = run(&["certify-gap", "--problem", &p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(result(&out).output["verdict"], "inapplicable");
    assert!(String::from_utf8_lossy(&out.stderr).contains("Inapplicable"));
}

#[test]
fn missing_law_exits_with_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(
        dir.path(),
        "p.json",
        &json!({"schema_version": 1, "task": "residuals", "config": {"window": [0.0, 1.0, 3.0]}}),
    );
    let out = run(&["residuals", "--problem", &p]);
    assert_eq!(out.status.code(), Some(2));
    let e: ErrorObject = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(e.error.message, "law: required");
}

#[test]
fn unreadable_problem_is_an_io_error() {
    let out = run(&["residuals", "--problem", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn no_convergence_still_emits_a_result() {
    let dir = tempfile::tempdir().unwrap();
    // a bounded law cannot hold five particles apart in [0, 2]
    let p = write_problem(
        dir.path(),
        "p.json",
        &json!({
            "schema_version": 1, "task": "solve-segment", "law": "exp:1",
            "options": {"max_sweeps": 40},
            "params": {"fixed_left": [-1.0, 0.0], "fixed_right": [2.0], "n_interior": 5}
        }),
    );
    let out = run(&["solve-segment", "--problem", &p]);
    assert_eq!(out.status.code(), Some(3));
    let r = result(&out);
    assert!(!r.converged);
    assert_eq!(r.error.unwrap().kind, "no_convergence");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = write_problem(
        d,
        "p.json",
        &json!({"schema_version": 1, "task": "solve-circle", "law": "exp:1", "params": {"n": 9}, "options": {"rng_seed": 3}}),
    );
    let mut files = Vec::new();
    for k in 0..2 {
        let (o, c, s) = (d.join(format!("o{k}.json")), d.join(format!("c{k}.csv")), d.join(format!("s{k}.svg")));
        let out = run(&[
            "solve-circle",
            "--problem",
            &p,
            "--out",
            o.to_str().unwrap(),
            "--csv",
            c.to_str().unwrap(),
            "--svg",
            s.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        files.push([o, c, s].map(|f| std::fs::read(f).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0][2]).starts_with("<svg"));
}

#[test]
fn log_level_comes_from_environment() {
    let out = bin()
        .args(["solve-circle", "--n", "3", "--law", "coulomb"])
        .env("EQUILIB_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("running solve-circle"));
}

/// Every task runs, and its JSON re-parses both as a result and, for the
/// echoed input, as a problem.
#[test]
fn every_task_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let left = json!({
        "window": [-3.0, -2.0, -1.0],
        "left_tail": {"kind": "arithmetic", "first": -4.0, "gap": 1.0},
        "c": 1.0, "C": 1.0
    });
    let observed = json!({
        "window": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
        "right_tail": {"kind": "arithmetic", "first": 8.0, "gap": 1.0},
        "c": 1.0, "C": 1.0
    });
    let problems = [
        json!({"task": "solve-circle", "law": "coulomb", "params": {"n": 5}}),
        json!({"task": "solve-segment", "law": "coulomb", "params": {"fixed_left": [0.0], "fixed_right": [4.0], "n_interior": 3}}),
        json!({"task": "relax", "law": "coulomb", "config": {"window": [0.0, 0.5, 3.0, 4.0]}, "params": {"sweeps": 3}}),
        json!({"task": "zero-centered", "law": "coulomb", "params": {"a": -1.0, "b": 1.5, "n": 2}}),
        json!({"task": "extend", "law": "coulomb", "config": left, "params": {"x0": 0.0}}),
        json!({"task": "certify-gap", "law": "coulomb", "config": {"angles": [0.0, 1.0, 2.0, 4.0]}}),
        json!({"task": "check-monotone", "law": "coulomb", "config": {"window": [0.0, 1.0, 10.0]}}),
        json!({"task": "gap-ratio", "config": {"window": [0.0, 2.0, 3.0, 9.0]}}),
        json!({"task": "detect-period", "config": {"window": [0.0, 1.0, 3.0, 4.0, 6.0, 7.0, 9.0]}}),
        json!({"task": "residuals", "law": "exp:1", "config": trivial_line()}),
        json!({"task": "diff-field", "law": "coulomb", "params": {"x": {"window": [-1.0]}, "y": {"window": [-2.0]}, "w": [0.0, 1.0]}}),
        json!({"task": "blaschke", "config": observed, "params": {"n": 7}}),
        json!({"task": "reconstruct", "law": "coulomb", "config": observed,
               "params": {"m": 1, "starts": 4, "far_left_tail": {"kind": "arithmetic", "first": -2.0, "gap": 1.0}}}),
    ];
    for mut v in problems {
        v["schema_version"] = json!(1);
        let task = v["task"].as_str().unwrap().to_string();
        let p = write_problem(dir.path(), &format!("{task}.json"), &v);
        let csv = dir.path().join(format!("{task}.csv"));
        let out = run(&[&task, "--problem", &p, "--csv", csv.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{task}: {}", String::from_utf8_lossy(&out.stderr));
        let r = result(&out);
        assert_eq!(r.task, task);
        let again: RunResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(again, r, "{task}");
        Problem::from_value(r.input.clone()).unwrap_or_else(|e| panic!("{task}: {e}"));
        assert!(std::fs::read_to_string(&csv).unwrap().lines().count() >= 1, "{task}");
    }
}

#[test]
fn specific_task_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(
        dir.path(),
        "m.json",
        &json!({"schema_version": 1, "task": "check-monotone", "law": "coulomb", "config": {"window": [0.0, 1.0, 10.0]}}),
    );
    let r = result(&run(&["check-monotone", "--problem", &p]));
    assert_eq!(r.output["verdict"], "fail");

    let out = run(&["zero-centered", "--law", "coulomb", "--a", "-1", "--b", "1", "--n", "2"]);
    let r = result(&out);
    let w: Vec<f64> = serde_json::from_value(r.output["config"]["window"].clone()).unwrap();
    assert!((w[1] + 1.0).abs() < 1e-8 && (w[3] - 1.0).abs() < 1e-8);

    let p = write_problem(
        dir.path(),
        "b.json",
        &json!({"schema_version": 1, "task": "blaschke", "config": {"window": [0.0, 1.0, 2.0, 3.0]}}),
    );
    let out = run(&["blaschke", "--problem", &p]);
    assert_eq!(out.status.code(), Some(2), "C is not stated");
}
