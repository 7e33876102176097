use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"
[scenario]
samples_per_class = 20

[train]
widths = [8, 4]
warmup_epochs = 1

[train.collab]
epochs = 3

[train.sgd]
batch_size = 16
"#;

fn geocot(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geocot"))
        .args(args)
        .env("GEOCOT_OUT_ROOT", root)
        .current_dir(root)
        .output()
        .expect("spawn geocot")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(geocot(dir.path(), &["--help"]).status.code(), Some(0));
    let out = geocot(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
}

#[test]
fn ot_solve_writes_plan_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cost = write(dir.path(), "cost.csv", "0, 1, 2\n1, 0, 2\n2, 2, 0\n");
    let out = geocot(dir.path(), &["ot-solve", "--cost", &cost]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("ot-solve/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["objective"], 0.0);
    assert!(dir.path().join("ot-solve/plan.csv").exists());

    let mu = write(dir.path(), "mu.txt", "0.5 0.25 0.25");
    let out_dir = dir.path().join("sk");
    let out = geocot(
        dir.path(),
        &["ot-solve", "--cost", &cost, "--mu", &mu, "--method", "sinkhorn", "--reg", "0.05", "--out", out_dir.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["marginal_violation"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn ot_solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "0, x\n1, 0\n");
    let out = geocot(dir.path(), &["ot-solve", "--cost", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "parse");

    let neg = write(dir.path(), "neg.csv", "0, -1\n1, 0\n");
    assert_eq!(geocot(dir.path(), &["ot-solve", "--cost", &neg]).status.code(), Some(2));

    let cost = write(dir.path(), "cost.csv", "0.9, 0.1, 0.3\n0.2, 0.7, 0.5\n0.6, 0.4, 0.8\n");
    let out = geocot(
        dir.path(),
        &["ot-solve", "--cost", &cost, "--method", "sinkhorn", "--reg", "1", "--max-iter", "1", "--tol", "1e-15"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "not_converged");
}

#[test]
fn adapt_writes_run_and_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let out = geocot(dir.path(), &["adapt", "--config", &cfg, "--out", "first"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("first");
    let manifest: Value = serde_json::from_slice(&std::fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "completed");
    assert!(run.join("checkpoint.json").exists());
    let metrics = std::fs::read(run.join("metrics.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&metrics).lines().count(), 3);

    // A finished run directory is never overwritten.
    let again = geocot(dir.path(), &["adapt", "--config", &cfg, "--out", "first"]);
    assert_eq!(again.status.code(), Some(2));

    let replay = geocot(dir.path(), &["adapt", "--manifest", run.join("manifest.json").to_str().unwrap(), "--out", "second"]);
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("second/metrics.jsonl")).unwrap(), metrics);

    // Without --out the run lands under the output root.
    let default = geocot(dir.path(), &["adapt", "--config", &cfg]);
    assert_eq!(default.status.code(), Some(0));
    let named = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .any(|e| e.file_name().to_string_lossy().starts_with("adapt-"));
    assert!(named);
}

#[test]
fn adapt_config_and_divergence_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[scenario]\nsigma = -1.0\n[train.sgd]\nlearning_rate = 0.0\n");
    let out = geocot(dir.path(), &["adapt", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invalid_config");
    assert!(err["problems"].as_array().unwrap().len() >= 2);

    let blowup = write(dir.path(), "blowup.toml", &TINY.replace("batch_size = 16", "batch_size = 16\nlearning_rate = 1e6").replace("epochs = 3", "epochs = 20"));
    let out = geocot(dir.path(), &["adapt", "--config", &blowup, "--out", "boom"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("boom/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "diverged");
}

#[test]
fn bench_with_empty_filter_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = geocot(dir.path(), &["bench", "--filter", "no-such-scenario", "--out", "b"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("b/bench.csv").exists());
}
