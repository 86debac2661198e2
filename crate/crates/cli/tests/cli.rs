use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpbo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpbo")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const STUDY: &str = r#"{
  "parameters": [
    {"name": "lr", "type": "DOUBLE", "bounds": [0.0001, 1.0], "scaling": "LOG"},
    {"name": "layers", "type": "INTEGER", "bounds": [1, 8]},
    {"name": "opt", "type": "CATEGORICAL", "feasible_values": ["adam", "sgd"]}
  ],
  "objectives": [{"name": "acc"}]
}"#;

const FAST: &str = r#"{"firefly": {"max_evaluations": 1000}}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("study.json"), STUDY).unwrap();
    std::fs::write(dir.path().join("fast.json"), FAST).unwrap();
    dir
}

fn suggest(dir: &Path, count: &str) -> Output {
    gpbo(
        &["suggest", "--study", "study.json", "--state", "state.json", "--count", count, "--config", "fast.json"],
        dir,
    )
}

fn trials(o: &Output) -> Vec<Value> {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice::<Vec<Value>>(&o.stdout).unwrap()
}

#[test]
fn fresh_study_suggests_center() {
    let dir = setup();
    let t = trials(&suggest(dir.path(), "1"));
    assert_eq!(t.len(), 1);
    assert_eq!(t[0]["origin"], "center");
    let lr = t[0]["parameters"]["lr"].as_f64().unwrap();
    assert!((lr - 0.01).abs() < 1e-9, "log-scale center is the geometric mean, got {lr}");
}

#[test]
fn suggest_is_idempotent_without_completions() {
    let dir = setup();
    let first = trials(&suggest(dir.path(), "1"));
    let state = std::fs::read(dir.path().join("state.json")).unwrap();
    let again = trials(&suggest(dir.path(), "1"));
    assert_eq!(first, again);
    assert_eq!(state, std::fs::read(dir.path().join("state.json")).unwrap());
}

#[test]
fn suggest_complete_loop() {
    let dir = setup();
    let t = trials(&suggest(dir.path(), "1"));
    let id = t[0]["id"].as_u64().unwrap().to_string();
    let o = gpbo(&["complete", "--state", "state.json", "--id", &id, "--values", "0.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let batch = trials(&suggest(dir.path(), "4"));
    assert_eq!(batch.len(), 4);
    for i in 0..4 {
        for j in 0..i {
            assert_ne!(batch[i]["parameters"], batch[j]["parameters"]);
        }
    }
    let id = batch[0]["id"].as_u64().unwrap().to_string();
    let o = gpbo(&["complete", "--state", "state.json", "--id", &id, "--infeasible"], dir.path());
    assert_eq!(code(&o), 0);
    let state: Value = serde_json::from_slice(&std::fs::read(dir.path().join("state.json")).unwrap()).unwrap();
    let trial = state["trials"].as_array().unwrap().iter().find(|t| t["id"].to_string() == id).unwrap();
    assert_eq!(trial["state"], "INFEASIBLE");
}

#[test]
fn complete_errors() {
    let dir = setup();
    let t = trials(&suggest(dir.path(), "1"));
    let id = t[0]["id"].as_u64().unwrap().to_string();
    let o = gpbo(&["complete", "--state", "state.json", "--id", "999", "--values", "1"], dir.path());
    assert_eq!(code(&o), 3);
    let o = gpbo(&["complete", "--state", "state.json", "--id", &id, "--values", "1,2"], dir.path());
    assert_eq!(code(&o), 2);
    let o = gpbo(&["complete", "--state", "missing.json", "--id", &id, "--values", "1"], dir.path());
    assert_eq!(code(&o), 3);
    let o = gpbo(&["complete", "--state", "state.json", "--id", &id, "--values", "-1.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = gpbo(&["complete", "--state", "state.json", "--id", &id, "--values", "1"], dir.path());
    assert_eq!(code(&o), 3, "completing twice is a state error");
}

#[test]
fn malformed_and_mismatched_inputs() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let o = gpbo(&["suggest", "--study", "bad.json", "--state", "s.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());

    trials(&suggest(dir.path(), "1"));
    let other = STUDY.replace("\"acc\"", "\"loss\"");
    std::fs::write(dir.path().join("other.json"), other).unwrap();
    let o = gpbo(&["suggest", "--study", "other.json", "--state", "state.json"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn corrupt_state_is_not_touched() {
    let dir = setup();
    std::fs::write(dir.path().join("state.json"), "{\"truncated").unwrap();
    let o = suggest(dir.path(), "1");
    assert_eq!(code(&o), 3);
    assert_eq!(std::fs::read_to_string(dir.path().join("state.json")).unwrap(), "{\"truncated");
}

fn write_manifest(dir: &Path, body: &str) {
    std::fs::write(dir.join("manifest.json"), body).unwrap();
}

#[test]
fn bench_row_count_and_eval() {
    let dir = setup();
    write_manifest(dir.path(), r#"{"benchmarks": [{"function": "Sphere", "dimension": 2}], "seed": 3}"#);
    let o = gpbo(
        &["bench", "--config", "manifest.json", "--out", "runs", "--horizon", "10", "--repeats", "2", "--algo", "random"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("runs/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.starts_with("algorithm,benchmark,repeat,trial_index,param_json,objective_0,noiseless_0,best_so_far\n"));

    // Only one algorithm: nothing to compare.
    let o = gpbo(&["eval", "--results", "runs/results.csv", "--baseline", "random", "--out", "rep"], dir.path());
    assert_eq!(code(&o), 2);

    let o = gpbo(
        &["bench", "--config", "manifest.json", "--out", "runs2", "--horizon", "10", "--repeats", "2", "--algo", "quasi_random"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let o = gpbo(
        &["eval", "--results", "runs/results.csv", "runs2/results.csv", "--baseline", "random", "--out", "rep"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("rep/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(dir.path().join("rep/curves.csv").exists());
    assert!(dir.path().join("rep/Sphere-d2.svg").exists());

    let o = gpbo(
        &["eval", "--results", "runs/results.csv", "runs2/results.csv", "--baseline", "gp_bandit", "--out", "rep"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn identical_results_score_zero() {
    let dir = setup();
    write_manifest(dir.path(), r#"{"benchmarks": [{"function": "Discus", "dimension": 3}], "seed": 5}"#);
    let o = gpbo(
        &["bench", "--config", "manifest.json", "--out", "a", "--horizon", "8", "--repeats", "3", "--algo", "random"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    let renamed = csv.replace("\nrandom,", "\nclone,");
    std::fs::write(dir.path().join("b.csv"), renamed).unwrap();
    let o = gpbo(&["eval", "--results", "a/results.csv", "b.csv", "--baseline", "random", "--out", "rep"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("rep/report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "clone");
    assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn bench_errors() {
    let dir = setup();
    write_manifest(dir.path(), r#"{"benchmarks": [{"function": "NoSuchFunction", "dimension": 2}]}"#);
    let o = gpbo(&["bench", "--config", "manifest.json", "--out", "x"], dir.path());
    assert_eq!(code(&o), 2);
    write_manifest(dir.path(), r#"{"benchmarks": [{"function": "Sphere", "dimension": 2}]}"#);
    let o = gpbo(&["bench", "--config", "manifest.json", "--out", "x", "--horizon", "0"], dir.path());
    assert_eq!(code(&o), 2);
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = gpbo(&["eval", "--results", "empty.csv", "--baseline", "random", "--out", "rep"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn bench_is_deterministic() {
    let dir = setup();
    write_manifest(
        dir.path(),
        r#"{"benchmarks": [{"function": "Sphere", "dimension": 2}], "algorithms": ["gp_bandit", "random"],
            "seed": 11, "horizon": 6, "repeats": 2, "designer": {"firefly": {"max_evaluations": 500}}}"#,
    );
    for out in ["a", "b"] {
        let o = gpbo(&["bench", "--config", "manifest.json", "--out", out], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        std::fs::read(dir.path().join("a/results.csv")).unwrap(),
        std::fs::read(dir.path().join("b/results.csv")).unwrap()
    );
}
