use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use riql_lab::agents::LossTrace;
use riql_lab::corruption::{recorded_indices, Element};
use riql_lab::data::load_dataset;
use riql_lab::eval::read_results;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riql-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, env: &str, n: &str, name: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    ok(&["gen-data", "--env", env, "--n", n, "--seed", "1", "--out", p(&out)]);
    out
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--data", p(data), "--out", p(out), "--steps", "20", "--batch", "32", "--hidden", "16"];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn gen_data_writes_requested_size_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "gridworld", "2000", "a.jsonl");
    let b = gen(dir.path(), "gridworld", "2000", "b.jsonl");
    assert_eq!(load_dataset(&a).unwrap().len(), 2000);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["gen-data", "--env", "gridworld", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["train", "--algo", "sac", "--data", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = run(&["train", "--algo", "iql", "--data", p(&missing), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
    let out = run(&["gen-data", "--env", "hopper", "--n", "10", "--out", p(&missing)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupt_records_the_attack() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "1000", "d.jsonl");
    let bad = dir.path().join("bad.jsonl");
    ok(&[
        "corrupt", "--in", p(&data), "--out", p(&bad), "--element", "dynamics", "--mode", "random",
        "--rate", "0.3", "--scale", "1.0", "--seed", "7",
    ]);
    let clean = load_dataset(&data).unwrap();
    let corrupted = load_dataset(&bad).unwrap();
    let diff: Vec<usize> = (0..clean.len())
        .filter(|&i| clean.transitions[i] != corrupted.transitions[i])
        .collect();
    assert_eq!(diff.len(), 300);
    assert_eq!(recorded_indices(&corrupted, Element::Dynamics).unwrap().unwrap(), diff);
    assert!(corrupted.metadata.values().any(|v| v.contains("\"seed\":7")));

    let same = dir.path().join("same.jsonl");
    ok(&["corrupt", "--in", p(&data), "--out", p(&same), "--element", "reward", "--rate", "0"]);
    assert_eq!(load_dataset(&same).unwrap().transitions, clean.transitions);
}

#[test]
fn corrupt_rejects_bad_attacks() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "200", "d.jsonl");
    let out = dir.path().join("o.jsonl");
    let base = ["corrupt", "--in", p(&data), "--out", p(&out), "--rate", "0.3"];
    let mut mixed = base.to_vec();
    mixed.extend(["--element", "mixed", "--mode", "adversarial"]);
    assert_eq!(run(&mixed).status.code(), Some(3));
    let mut no_oracle = base.to_vec();
    no_oracle.extend(["--element", "observation", "--mode", "adversarial"]);
    assert_eq!(run(&no_oracle).status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn adversarial_corrupt_uses_checkpoint_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "300", "d.jsonl");
    let agent = dir.path().join("agent");
    train(&data, &agent, &["--algo", "iql"]);
    let bad = dir.path().join("bad.jsonl");
    ok(&[
        "corrupt", "--in", p(&data), "--out", p(&bad), "--element", "action", "--mode", "adversarial",
        "--rate", "0.1", "--oracle", p(&agent), "--pgd-steps", "3",
    ]);
    assert_eq!(recorded_indices(&load_dataset(&bad).unwrap(), Element::Action).unwrap().unwrap().len(), 30);
}

#[test]
fn train_writes_checkpoint_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "500", "d.jsonl");
    let run_dir = dir.path().join("run");
    train(&data, &run_dir, &["--algo", "riql", "--seed", "3"]);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["config"]["algorithm"], "riql");
    assert_eq!(config["config"]["seed"], 3);
    let trace: LossTrace = serde_json::from_str(&fs::read_to_string(run_dir.join("trace.json")).unwrap()).unwrap();
    assert_eq!(trace.len(), 20);
}

#[test]
fn riql_flags_reduce_to_iql_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "500", "d.jsonl");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&data, &a, &["--algo", "riql", "--k", "2", "--alpha", "0", "--no-huber", "--no-norm"]);
    train(&data, &b, &["--algo", "iql"]);
    assert_eq!(
        fs::read(a.join("trace.json")).unwrap(),
        fs::read(b.join("trace.json")).unwrap()
    );
}

#[test]
fn train_config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "300", "d.jsonl");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"beta": 1.5, "tau": 0.8}"#).unwrap();
    let run_dir = dir.path().join("run");
    train(&data, &run_dir, &["--algo", "iql", "--config", p(&cfg), "--tau", "0.6"]);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["config"]["beta"], 1.5);
    assert_eq!(config["config"]["tau"], 0.6);

    fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    let out = run(&["train", "--algo", "iql", "--data", p(&data), "--out", p(&run_dir), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_appends_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "pointmass", "300", "d.jsonl");
    let agent = dir.path().join("agent");
    train(&data, &agent, &["--algo", "bc"]);
    let csv = dir.path().join("results.csv");
    let args = [
        "eval", "--agent", p(&agent), "--env", "pointmass", "--episodes", "2", "--seeds", "0,1,2,3",
        "--out", p(&csv), "--reference-episodes", "5",
    ];
    ok(&args);
    let first = read_results(&csv).unwrap();
    assert_eq!(first.len(), 4);
    ok(&args);
    let both = read_results(&csv).unwrap();
    assert_eq!(both.len(), 8);
    for r in &first {
        assert_eq!(both.iter().filter(|b| *b == r).count(), 2);
    }

    let mut kurt = args.to_vec();
    kurt.extend(["--kurtosis-data", p(&data)]);
    let out = run(&kurt);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(read_results(&csv).unwrap().len(), 8);

    let wrong = run(&["eval", "--agent", p(&agent), "--env", "gridworld", "--out", p(&csv)]);
    assert_eq!(wrong.status.code(), Some(3));
}

#[test]
fn suite_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("suite.json");
    let config = serde_json::json!({
        "env": "pointmass",
        "dataset": {"generate": {"n": 300, "seed": 2}},
        "algorithms": ["bc", "iql"],
        "attacks": {"elements": ["reward"], "include_clean": true},
        "agent": {"train_steps": 3, "batch_size": 16, "hidden": [8]},
        "eval": {"episodes": 1, "seeds": [0, 1], "reference_episodes": 3},
        "output_dir": out,
    });
    fs::write(&cfg, config.to_string()).unwrap();
    let first = ok(&["suite", "--config", p(&cfg)]);
    assert!(first.contains("8 cells run, 0 skipped, 0 failed"), "{first}");
    assert_eq!(read_results(out.join("results.csv")).unwrap().len(), 8);
    let second = ok(&["suite", "--config", p(&cfg)]);
    assert!(second.contains("0 cells run, 8 skipped"), "{second}");

    let empty = dir.path().join("empty.json");
    let mut config = config;
    config["algorithms"] = serde_json::json!([]);
    config["output_dir"] = serde_json::json!(dir.path().join("empty"));
    fs::write(&empty, config.to_string()).unwrap();
    ok(&["suite", "--config", p(&empty)]);
    let text = fs::read_to_string(dir.path().join("empty/results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn diag_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "gridworld", "1000", "d.jsonl");
    let bad = dir.path().join("bad.jsonl");
    ok(&["corrupt", "--in", p(&data), "--out", p(&bad), "--element", "reward", "--rate", "0.2", "--seed", "4"]);

    let zeta: serde_json::Value =
        serde_json::from_str(&ok(&["diag", "zeta", "--clean", p(&data), "--corrupted", p(&bad)])).unwrap();
    assert_eq!(zeta["zeta_bound"].as_array().unwrap().len(), 1000);
    assert!(zeta["cumulative"].as_f64().unwrap() > 0.0);
    let out = run(&["diag", "zeta", "--clean", p(&data), "--corrupted", p(&bad), "--env", "pointmass"]);
    assert_eq!(out.status.code(), Some(3));

    let agent = dir.path().join("agent");
    train(&bad, &agent, &["--algo", "riql"]);
    let k: serde_json::Value =
        serde_json::from_str(&ok(&["diag", "kurtosis", "--agent", p(&agent), "--data", p(&bad), "--samples", "256"]))
            .unwrap();
    assert!(k["kurtosis"].as_f64().unwrap() >= 1.0);
    let pen: serde_json::Value = serde_json::from_str(&ok(&[
        "diag", "penalty", "--agent", p(&agent), "--data", p(&bad), "--element", "reward",
    ]))
    .unwrap();
    assert_eq!(pen["k_ensemble"], 5);
    let none = run(&["diag", "penalty", "--agent", p(&agent), "--data", p(&data), "--element", "reward"]);
    assert_eq!(none.status.code(), Some(3));

    let bc = dir.path().join("bc");
    train(&bad, &bc, &["--algo", "bc"]);
    let refused = run(&["diag", "kurtosis", "--agent", p(&bc), "--data", p(&bad)]);
    assert_eq!(refused.status.code(), Some(3));
}
