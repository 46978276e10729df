use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const REQUIRED: [&str; 11] = [
    "greens-dalembert",
    "support-cones",
    "resolvent",
    "master-identity",
    "jacobi-free-field",
    "jacobi-epsilon",
    "leibniz",
    "additivity-locality",
    "cone-counts",
    "hyperbolicity-domains",
    "bump-partition",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peierls-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn listed() -> Vec<String> {
    let out = run(&["--list"]);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap().lines().map(|l| l.split_whitespace().next().unwrap().to_string()).collect()
}

#[test]
fn list_is_stable_and_complete() {
    let a = listed();
    assert_eq!(a, listed());
    for r in REQUIRED {
        assert!(a.iter().any(|n| n == r), "missing {r}");
    }
}

#[test]
fn malformed_metric_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 1\n[metric]\nkind = \"wormhole\"\n");
    let out_dir = dir.path().join("out");
    let out = run(&[&cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_suite_and_bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.toml", "seed = 1\n");
    let out_dir = dir.path().join("out");
    assert_eq!(run(&[&cfg, "--suite", "nope", "--out", out_dir.to_str().unwrap()]).status.code(), Some(2));
    let bad = write(dir.path(), "grid.toml", "[grid]\nnt = 4\nnx = 64\ndt = 0.1\ndx = 0.1\n");
    assert_eq!(run(&[&bad, "--out", out_dir.to_str().unwrap()]).status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn failing_suite_exits_1_and_names_the_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strict.toml", "[tolerances]\ngreens_order = 3.0\n");
    let out_dir = dir.path().join("out");
    let out = run(&[&cfg, "--suite", "greens-dalembert", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("greens.observed_order"));
    let env: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("greens-dalembert.json")).unwrap()).unwrap();
    assert_eq!(env["status"], "fail");
    assert_eq!(env["schema_version"], 1);
}

fn envelope(dir: &Path, suite: &str) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{suite}.json"))).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn identical_config_and_seed_reproduce_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 11\n[output]\ncsv = true\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&[&cfg, "--suite", "cone-counts", "--suite", "support-algebra", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for s in ["cone-counts", "support-algebra"] {
        assert_eq!(envelope(&a, s), envelope(&b, s));
    }
    assert!(a.join("cone-counts.csv").exists());
    let other = dir.path().join("c");
    run(&[&cfg, "--suite", "support-algebra", "--seed", "12", "--out", other.to_str().unwrap()]);
    assert_eq!(envelope(&other, "support-algebra")["seed"]["master"], 12);
}

#[test]
fn example_config_parses_and_runs_a_suite() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[root.to_str().unwrap(), "--suite", "jacobi-epsilon", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(dir.path(), "jacobi-epsilon");
    assert!(env["residuals"]["jacobi.config"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn readme_suite_table_matches_registry() {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let documented: Vec<String> = readme
        .lines()
        .filter_map(|l| l.strip_prefix("| `"))
        .filter_map(|l| l.split('`').next())
        .map(str::to_string)
        .collect();
    let registry = listed();
    assert_eq!(documented, registry);
}
