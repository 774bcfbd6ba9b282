use std::path::Path;
use std::process::Output;

use assert_cmd::Command;
use serde_json::Value;

fn reynolds(cache: &Path) -> Command {
    let mut c = Command::cargo_bin("reynolds").unwrap();
    c.env("REYNOLDS_CACHE", cache);
    c
}

fn run(cache: &Path, args: &[&str]) -> Output {
    reynolds(cache).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn expand(cache: &Path, datum: &str, order: &str, tail: bool) {
    let mut args = vec!["expand", "--datum", datum, "--order", order];
    if tail {
        args.push("--tail");
    }
    let o = run(cache, &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn expand_order_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["expand", "--datum", "bnw", "--order", "0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    // six modes: three canonical wave vectors and their negatives
    assert!(lines[1].starts_with("0,6,"), "{out}");
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["expand", "--datum", "nope", "--order", "1"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["expand", "--datum", "bnw"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["control", "--datum", "bnw", "--order", "2", "--r", "0.1", "--variant", "bogus"]).status.code(), Some(2));
}

#[test]
fn control_and_critical_never_expand() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["control", "--datum", "tg", "--order", "2", "--r", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no expansion cache"));
    let o = run(dir.path(), &["critical", "--datum", "tg", "--order", "2", "--lo", "0.1", "--hi", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn resource_limit_flushes_completed_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["expand", "--datum", "km", "--order", "5", "--term-ceiling", "50000"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), 5);
    // the partial cache is usable
    let o = run(dir.path(), &["control", "--datum", "km", "--order", "3", "--r", "0.01"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn zero_parameter_stays_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    expand(dir.path(), "bnw", "2", true);
    let o = run(dir.path(), &["control", "--datum", "bnw", "--order", "2", "--r", "0", "--variant", "tautological"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"]["kind"], "global_decay");
    assert_eq!(v["max_value"], 0.0);
    assert_eq!(v["manifest_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn outputs_are_deterministic_and_carry_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    expand(dir.path(), "tg", "2", false);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = run(
                dir.path(),
                &["control", "--datum", "tg", "--order", "2", "--r", "0.3", "--out-dir", out.to_str().unwrap()],
            );
            assert!(o.status.success());
            out
        })
        .collect();
    for f in ["run.json", "estimators.csv", "trajectory.csv", "verdict.json"] {
        let a = std::fs::read(runs[0].join(f)).unwrap();
        assert_eq!(a, std::fs::read(runs[1].join(f)).unwrap(), "{f}");
        assert!(!a.contains(&b'\r'));
    }
    let v: Value = serde_json::from_slice(&std::fs::read(runs[0].join("verdict.json")).unwrap()).unwrap();
    let hash = v["manifest_hash"].as_str().unwrap();
    for f in ["estimators.csv", "trajectory.csv"] {
        let text = std::fs::read_to_string(runs[0].join(f)).unwrap();
        assert!(text.lines().next().unwrap().contains(hash), "{f}");
    }
    let est = std::fs::read_to_string(runs[0].join("estimators.csv")).unwrap();
    assert!(est.lines().any(|l| l == "t,D_n,D_n1,eps_n"));
}

#[test]
fn critical_with_wide_tolerance_returns_input_bracket() {
    let dir = tempfile::tempdir().unwrap();
    expand(dir.path(), "bnw", "1", false);
    let o = run(
        dir.path(),
        &["critical", "--datum", "bnw", "--order", "1", "--lo", "0.01", "--hi", "0.3", "--tol", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["bracket"], serde_json::json!([0.01, 0.3]));
    assert_eq!(v["probes"].as_array().unwrap().len(), 2);
    // an endpoint pair that does not straddle the threshold is rejected
    let o = run(
        dir.path(),
        &["critical", "--datum", "bnw", "--order", "1", "--lo", "0.001", "--hi", "0.002"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_panels_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = run(dir.path(), &["report", "--run-dir", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing input"));

    expand(dir.path(), "bnw", "2", false);
    let out = dir.path().join("run");
    let o = run(
        dir.path(),
        &["control", "--datum", "bnw", "--order", "2", "--r", "0.05", "--out-dir", out.to_str().unwrap()],
    );
    assert!(o.status.success());
    let o = run(dir.path(), &["report", "--run-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = stdout(&o);
    assert!(summary.contains("gamma(0) = 2.2273"), "{summary}");
    assert!(summary.contains("R < 1.4795"), "{summary}");
    assert!(summary.contains("R < 5.2749"), "{summary}");
    for f in ["panel_a_gamma.csv", "panel_b_growth.csv", "panel_c_error.csv", "panel_d_control.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn bnw_order_five_tautological_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    expand(dir.path(), "bnw", "5", true);
    let verdict = |r: &str| {
        let o = run(
            dir.path(),
            &["control", "--datum", "bnw", "--order", "5", "--variant", "tautological", "--r", r],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_str::<Value>(&stdout(&o)).unwrap()["verdict"].clone()
    };
    assert_eq!(verdict("0.23")["kind"], "global_decay");
    let up = verdict("0.24");
    assert_eq!(up["kind"], "blow_up");
    assert!(up["t_c"].as_f64().unwrap().is_finite());
}
