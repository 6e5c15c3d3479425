use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_w2slab");

fn run(args: &[&str], out: &Path) -> Output {
    run_env(args, out, None)
}

fn run_env(args: &[&str], out: &Path, seed: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env_remove("W2SLAB_SEED");
    if let Some(s) = seed {
        cmd.env("W2SLAB_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_VERIFY: [&str; 10] = [
    "--set",
    "scenarios=10",
    "--set",
    "triples=50",
    "--set",
    "pairs=100",
    "--set",
    "lemma_sets=1",
    "--set",
    "grid_step=0.01",
];

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("verify.json"));
    for key in ["config", "rows", "verdicts", "duration_seconds"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["verdicts"].as_array().unwrap().iter().all(|v| v["passed"] == true));
    assert_eq!(r["config"]["triples"], 1000);
}

#[test]
fn verify_tiny_tolerance_fails_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["verify", "--set", "tolerance=1e-30"];
    args.extend(SMALL_VERIFY);
    let o = run(&args, dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("law_of_cosines"), "{err}");
}

#[test]
fn verify_seed_override_changes_draws_not_verdicts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = vec!["verify"];
    args.extend(SMALL_VERIFY);
    assert_eq!(code(&run_env(&args, a.path(), Some("1"))), 0);
    assert_eq!(code(&run_env(&args, b.path(), Some("2"))), 0);
    let ra = report(&a.path().join("verify.json"));
    let rb = report(&b.path().join("verify.json"));
    assert_eq!(ra["config"]["seed"], 1);
    let passed = |r: &Value| -> Vec<bool> { r["verdicts"].as_array().unwrap().iter().map(|v| v["passed"].as_bool().unwrap()).collect() };
    assert_eq!(passed(&ra), passed(&rb));
    assert_ne!(
        fs::read(a.path().join("theorems.csv")).unwrap(),
        fs::read(b.path().join("theorems.csv")).unwrap()
    );
}

#[test]
fn ridge_single_cell_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["ridge", "--set", "gammas=2", "--set", "eta0s=1", "--set", "trials=1", "--set", "d_w=40"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("ridge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("gamma,eta0,trial,misfit"));

    let bad = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["ridge", "--set", "gammas=0.5"], bad.path())), 2);
    assert_eq!(code(&run(&["ridge", "--set", "trials=0"], bad.path())), 2);
}

#[test]
fn classify_default_trends_pass_and_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = run(&["classify"], a.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(code(&run(&["classify"], b.path())), 0);
    let csv = fs::read_to_string(a.path().join("classify.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "loss,alpha,repeat,teacher_acc,student_acc,param_distance,mean_gdv");
    assert_eq!(csv.lines().count(), 1 + 2 * 5 * 3);
    assert_eq!(csv, fs::read_to_string(b.path().join("classify.csv")).unwrap());
    let r = report(&a.path().join("classify.json"));
    let names: Vec<&str> = r["verdicts"].as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"rce_flat") && names.contains(&"ce_drop"));
}

#[test]
fn classify_composite_losses_report_without_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["classify", "--set", "losses=cace,sl,aux", "--set", "alphas=1", "--set", "repeats=1", "--set", "n_test=200"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("classify.json"));
    assert_eq!(r["rows"].as_array().unwrap().len(), 3);
    assert!(r["verdicts"].as_array().unwrap().is_empty());
}

#[test]
fn classify_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["classify", "--set", "alphas=[]"], dir.path())), 2);
    assert_eq!(code(&run(&["classify", "--set", "losses=hinge"], dir.path())), 2);
    assert_eq!(code(&run(&["classify", "--set", "colour=blue"], dir.path())), 2);
    assert_eq!(code(&run(&["classify", "--set", "student_optimizer=lbfgs"], dir.path())), 2);
}

#[test]
fn bias_variance_tiny_run_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bv.toml");
    fs::write(
        &cfg,
        "seed = 4\n\n[bias-variance]\nk = 1\nn_splits = 2\nn_test = 40\nn_pseudo = 200\n\n[ridge]\ntrials = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["bias-variance", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out.join("bias_variance.json"));
    let identity = r["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == "identity").unwrap();
    assert_eq!(identity["passed"], true);
    assert_eq!(fs::read_to_string(out.join("bias_variance.csv")).unwrap().lines().count(), 41);

    assert_eq!(code(&run(&["bias-variance", "--set", "n_splits=0"], &out)), 2);
    assert_eq!(code(&run(&["bias-variance", "--set", "k=1", "--set", "n_splits=1"], &out)), 2);
    fs::write(&cfg, "[weird]\nk = 1\n").unwrap();
    assert_eq!(code(&run(&["bias-variance", "--config", cfg.to_str().unwrap()], &out)), 2);
}
