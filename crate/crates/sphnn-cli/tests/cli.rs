//! Black-box checks of the binary: flag surface, exit codes, the one-line
//! stderr contract, and artifact shapes on a tiny dataset.

use std::path::Path;
use std::process::{Command, Output};

fn sphnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    assert_eq!(
        text.trim_end().lines().count(),
        1,
        "stderr should be one line, got: {text}"
    );
    text.trim_end().to_string()
}

fn motif(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../motifs")
        .join(name)
        .canonicalize()
        .unwrap()
        .display()
        .to_string()
}

/// Tiny-training run config: full pipeline shape at a few epochs.
fn write_config(dir: &Path) {
    let cfg = serde_json::json!({
        "data": "data",
        "motifs": [motif("pvp.json")],
        "model": {},
        "train": {"max_epochs": 3, "patience": 3},
    });
    std::fs::write(
        dir.join("cfg.json"),
        serde_json::to_string_pretty(&cfg).unwrap(),
    )
    .unwrap();
}

#[test]
fn help_lists_every_command() {
    let out = sphnn(Path::new("."), &["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "gen-synth",
        "build",
        "train",
        "eval",
        "sweep-lambda",
        "sweep-label-rate",
        "ablate",
        "grad-check",
    ] {
        assert!(text.contains(cmd), "--help does not mention {cmd}");
    }
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("cfg.json"),
        r#"{"data":"data","motifs":["m.json"],"typo_key":1}"#,
    )
    .unwrap();
    let out = sphnn(tmp.path(), &["train", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    let line = stderr_line(&out);
    assert!(line.starts_with("config error: "), "got: {line}");
    assert!(line.contains("typo_key"), "error should name the key: {line}");
}

#[test]
fn missing_dataset_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sphnn(
        tmp.path(),
        &["build", "--data", "absent", "--motifs", &motif("apa.json"), "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("data error: "));
}

#[test]
fn unreachable_grad_threshold_exits_4() {
    let out = sphnn(Path::new("."), &["grad-check", "--threshold", "1e-12"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("numeric error: "));
}

#[test]
fn unknown_split_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sphnn(
        tmp.path(),
        &["eval", "--checkpoint", "c", "--data", "d", "--split", "bogus"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("bogus"));
}

#[test]
fn out_of_range_rate_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("data")).unwrap();
    write_config(tmp.path());
    let out = sphnn(
        tmp.path(),
        &["sweep-label-rate", "--config", "cfg.json", "--rates", "0.0,0.5", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_lambda_grid_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("data")).unwrap();
    write_config(tmp.path());
    let out = sphnn(
        tmp.path(),
        &["sweep-lambda", "--config", "cfg.json", "--grid", "0.5", "--out", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("grid"));
}

#[test]
fn gen_synth_seed_flag_changes_the_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    for (out, seed) in [("a", "9"), ("b", "9"), ("c", "0")] {
        let r = sphnn(tmp.path(), &["gen-synth", "--out", out, "--seed", seed]);
        assert!(r.status.success());
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("edges.tsv")).unwrap();
    assert_eq!(read("a"), read("b"), "same seed must reproduce");
    assert_ne!(read("a"), read("c"), "different seeds must differ");
}

#[test]
fn build_reports_instances_and_writes_hypergraphs() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(sphnn(tmp.path(), &["gen-synth", "--out", "data"])
        .status
        .success());
    let motifs = format!("{},{}", motif("apa.json"), motif("pvp.json"));
    let out = sphnn(
        tmp.path(),
        &["build", "--data", "data", "--motifs", &motifs, "--out", "hg"],
    );
    assert!(out.status.success());
    let stats: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("hg/build_stats.json")).unwrap(),
    )
    .unwrap();
    let rows = stats.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(row["instances_found"].as_u64().unwrap() > 0);
        let file = row["hypergraph_file"].as_str().unwrap();
        let hg: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(tmp.path().join("hg").join(file)).unwrap(),
        )
        .unwrap();
        assert!(hg["edges"].as_array().unwrap().len() > 0);
    }
}

#[test]
fn train_then_eval_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(sphnn(tmp.path(), &["gen-synth", "--out", "data"])
        .status
        .success());
    write_config(tmp.path());
    let out = sphnn(tmp.path(), &["train", "--config", "cfg.json", "--out", "run"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["epochs_run"].as_u64().unwrap() <= 3);
    let history = std::fs::read_to_string(tmp.path().join("run/history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_acc"));

    let eval = sphnn(
        tmp.path(),
        &["eval", "--checkpoint", "run/checkpoint", "--data", "data", "--split", "val"],
    );
    assert!(eval.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&eval.stdout)).unwrap();
    assert_eq!(parsed["split"], "val");
    assert!(parsed["accuracy"].as_f64().unwrap() >= 0.0);
}
