use std::path::Path;
use std::process::{Command, Output};

use beliefmdp::instances::tiger;
use beliefmdp::runtime::platzman_to_json;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beliefmdp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_tiger(dir: &Path) -> String {
    let path = dir.join("tiger.json");
    std::fs::write(&path, platzman_to_json(&tiger(0.85), None)).unwrap();
    path.to_string_lossy().into_owned()
}

fn value(o: &Output, key: &str) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {}", stdout(o)))
}

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_tiger(dir.path());
    let o = cli(&["validate", &model]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("platzman"));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"kind": "mdp", "states": ["x"], "actions": ["a"], "transition": [[[0.9]]], "cost": [[0]], "discount": 0.9}"#,
    )
    .unwrap();
    let o = cli(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("transition(x=x,a=a): row sums to 0.9"));

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    assert_eq!(cli(&["validate", garbled.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn solve_then_simulate_the_written_policy() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_tiger(dir.path());
    let out = dir.path().to_str().unwrap();
    let o = cli(&["solve", &model, "--horizon", "2", "--alpha", "1", "--belief", "uniform", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((value(&o, "value") - 2.0).abs() < 1e-12);
    let policy = std::fs::read_to_string(dir.path().join("policy.csv")).unwrap();
    assert!(policy.starts_with("node_id,epoch,belief,obs,action"));
    let values = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
    assert!(values.starts_with("node_id,epoch,steps_to_go,value"));

    let policy_path = dir.path().join("policy.csv");
    let o = cli(&[
        "simulate", &model, "--policy", policy_path.to_str().unwrap(), "--runs", "2000", "--seed", "5", "--horizon", "2",
        "--alpha", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (mean, se) = (value(&o, "mean"), value(&o, "stderr"));
    assert!((mean - 2.0).abs() <= 3.5 * se + 1e-12, "{mean} ± {se}");
    let again = cli(&[
        "simulate", &model, "--policy", policy_path.to_str().unwrap(), "--runs", "2000", "--seed", "5", "--horizon", "2",
        "--alpha", "1",
    ]);
    assert_eq!(stdout(&o), stdout(&again));
}

#[test]
fn oracle_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_tiger(dir.path());
    let out = dir.path().to_str().unwrap();
    let s = cli(&["solve", &model, "--horizon", "2", "--out-dir", out]);
    let o = cli(&["oracle", &model, "--horizon", "2"]);
    assert!(o.status.success());
    assert!((value(&s, "value") - value(&o, "value")).abs() < 1e-9);
    let big = cli(&["oracle", &model, "--horizon", "3"]);
    assert_eq!(big.status.code(), Some(3));
}

#[test]
fn reduce_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_tiger(dir.path());
    let out = dir.path().to_str().unwrap();
    let o = cli(&["reduce", &model, "--belief", "0.3,0.7", "--horizon", "2", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["nodes.csv", "edges.csv"] {
        let t = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(t.lines().count() > 1, "{f}");
    }
    let bad = cli(&["reduce", &model, "--belief", "0.3", "--horizon", "2", "--out-dir", out]);
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn solve_inf_and_simulate_grid_policy() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_tiger(dir.path());
    let out = dir.path().to_str().unwrap();
    let o = cli(&["solve-inf", &model, "--grid", "8", "--alpha", "0.9", "--tol", "1e-6", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&o, "vertices"), 9.0);
    let grid = dir.path().join("grid.csv");
    let s = cli(&["simulate", &model, "--policy", grid.to_str().unwrap(), "--runs", "200", "--horizon", "4", "--alpha", "0.9"]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
}

#[test]
fn diagnose_emits_report_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"target": 0.25, "kernel": {"kind": "point-mass", "s1": ["a"], "s1_star": "a", "grid": 3}}"#)
        .unwrap();
    let o = cli(&["diagnose", spec.to_str().unwrap(), "--suite", "equivalence"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("n,modulus_name,test_object_id,value,verdict"));
    assert!(text.contains("non-vanishing"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("all fail"));
    assert_eq!(cli(&["diagnose", spec.to_str().unwrap(), "--suite", "belief"]).status.code(), Some(4));
}
