use std::path::Path;
use std::process::{Command, Output};

use topo_rationale::harness::runs::RunManifest;

fn cli(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_topo-rationale")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A small BA-2Motifs dataset and a short config.
fn setup(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, r#"{"variant": "BA2Motifs", "num_graphs": 60, "seed": 4}"#).unwrap();
    let data = dir.join("data");
    cli(&["generate", "--spec", path(&spec), "--out", path(&data)]);
    let config = dir.join("run.cfg");
    std::fs::write(&config, "# short run\nepochs = 2\nbatch = 16\nhidden = 8\nelements = 2\n").unwrap();
    (data, config)
}

fn metrics(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn generate_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config) = setup(dir.path());
    for f in ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let run = dir.path().join("run");
    cli(&["train", "--config", path(&config), "--data", path(&data), "--out", path(&run)]);
    let manifest = RunManifest::read(&run).unwrap();
    assert_eq!(manifest.command, "train");
    assert_eq!(manifest.config_hash.len(), 64);
    assert!(manifest.config.contains("epochs = 2"));
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let ckpt = run.join("checkpoint.txt");
    cli(&["eval", "--checkpoint", path(&ckpt), "--data", path(&data)]);
    let first = std::fs::read(run.join("eval/metrics.json")).unwrap();
    cli(&["eval", "--checkpoint", path(&ckpt), "--data", path(&data)]);
    assert_eq!(first, std::fs::read(run.join("eval/metrics.json")).unwrap(), "eval is deterministic");
    assert_eq!(metrics(&run.join("eval"))["test_accuracy"], metrics(&run)["test_accuracy"]);

    let csv = dir.path().join("bars/barcodes.csv");
    cli(&["export-barcodes", "--checkpoint", path(&ckpt), "--data", path(&data), "--out", path(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("split,graph_id,side,dim,birth,death,creator,killer\n"));
    for split in ["train", "val", "test"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{split},"))), "{split}");
    }
    assert!(dir.path().join("bars/barcodes.csv.manifest.json").exists());
}

#[test]
fn ablating_both_terms_is_plain_cross_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config) = setup(dir.path());
    let ablated = dir.path().join("ablate");
    cli(&[
        "ablate", "--config", path(&config), "--no-topo", "--no-prior", "--data", path(&data), "--seeds", "1", "--out",
        path(&ablated),
    ]);
    let table = std::fs::read_to_string(ablated.join("ablation.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("no-topo-no-prior,")).expect("ablated row");
    let accuracy: f64 = row.split(',').nth(2).unwrap().parse().unwrap();

    let plain = dir.path().join("plain.cfg");
    let text = std::fs::read_to_string(&config).unwrap() + "alpha = 0\nbeta = 0\n";
    std::fs::write(&plain, text).unwrap();
    let run = dir.path().join("plain");
    cli(&["train", "--config", path(&plain), "--data", path(&data), "--out", path(&run)]);
    assert_eq!(metrics(&run)["test_accuracy"].as_f64().unwrap(), accuracy);
}

#[test]
fn check_theorem_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("theorem.cfg");
    std::fs::write(&config, "lambda0 = 16\nalpha = 0.01\n").unwrap();
    let out = dir.path().join("theorem");
    let stdout = cli(&["check-theorem", "--config", path(&config), "--out", path(&out)]).stdout;
    let stdout = String::from_utf8(stdout).unwrap();
    assert!(stdout.contains("geometric") && stdout.contains("literal"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("theorem.json")).unwrap()).unwrap();
    assert_eq!(report["instances"].as_array().unwrap().len(), 40);
    assert_eq!(RunManifest::read(&out).unwrap().metrics["geometric_instances"], 20.0);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "nonsense = 1\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_topo-rationale");
    let out = Command::new(bin).args(["check-theorem", "--config", path(&config)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
    let out = Command::new(bin).env("TOPING_THREADS", "zero").args(["check-theorem"]).output().unwrap();
    assert!(!out.status.success());
}
