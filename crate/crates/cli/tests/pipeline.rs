//! End-to-end runs of the `swapattn` binary on a small chain.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
train_size = 12

[dataset]
n_sites = 5

[dataset.grid]
h1 = [0.0, 1.6]
h2 = [-1.6, 1.6]
shape = [8, 8]

[train]
epochs = 25

[sweep]
h2_step = 0.2

[accuracy]
sizes = [6, 12]
repeats = 2
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_swapattn"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert!(ok(d, &["gen"]).contains("64 records"));
    ok(d, &["train"]);
    let eval = ok(d, &["eval"]);
    assert!(eval.contains("held-out accuracy"), "{eval}");
    ok(d, &["attention", "--h1", "0.0", "--h2", "0.0"]);
    ok(d, &["attention", "--h1", "0.5", "--h2", "-1.2", "--shots", "500"]);
    ok(d, &["analyze"]);
    ok(d, &["phase-diagram"]);
    ok(d, &["accuracy-curve"]);
    let out = d.join("out");
    for f in [
        "manifest.json",
        "states.bin",
        "checkpoint.json",
        "loss_history.csv",
        "predictions.csv",
        "attention_h1_0.0000_h2_0.0000.csv",
        "attention_h1_0.0000_h2_0.0000.json",
        "attention_h1_0.5000_h2_-1.2000.csv",
        "contrast_sweep.csv",
        "xi_sweep.csv",
        "sweep_boundaries.csv",
        "phase_diagram.csv",
        "phase_boundaries.csv",
        "accuracy_curve.csv",
        "accuracy_cells.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let digest = ok(d, &["config"]).lines().next().unwrap().to_string();
    let digest = digest.split('"').nth(1).unwrap();
    let csv = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_digest={digest}"));
    assert_eq!(csv.lines().count(), 2 + 64);
    assert!(fs::read_dir(&out)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".partial")));
}

#[test]
fn pipeline_is_bitwise_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        for cmd in [&["gen"][..], &["train"], &["analyze"]] {
            ok(d, cmd);
        }
    }
    for f in ["manifest.json", "states.bin", "checkpoint.json", "loss_history.csv", "contrast_sweep.csv", "xi_sweep.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn seed_flag_changes_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen"]);
    ok(d, &["train"]);
    let first = fs::read(d.join("out/checkpoint.json")).unwrap();
    ok(d, &["--seed", "99", "train"]);
    assert_ne!(first, fs::read(d.join("out/checkpoint.json")).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // Missing manifest is an I/O failure.
    assert_eq!(code(d, &["train"]), 3);
    ok(d, &["gen"]);
    // Training size outside (0, total) is a configuration error.
    assert_eq!(code(d, &["train", "--size", "0"]), 2);
    assert_eq!(code(d, &["train", "--size", "64"]), 2);
    // Unknown subcommand / bad flag is a usage error.
    assert_eq!(code(d, &["frobnicate"]), 2);

    let bad = d.join("bad.toml");
    fs::write(&bad, "[train]\nlearning_rate = -1.0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swapattn"))
        .args(["--config", bad.to_str().unwrap(), "config"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tampered_checkpoint_schema_is_incompatible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen"]);
    ok(d, &["train"]);
    let p = d.join("out/checkpoint.json");
    let text = fs::read_to_string(&p).unwrap();
    fs::write(&p, text.replace("swapattn.checkpoint/1", "swapattn.checkpoint/9")).unwrap();
    assert_eq!(code(d, &["eval"]), 6);
}

#[test]
fn checkpoint_from_another_manifest_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen"]);
    ok(d, &["train"]);
    // Same dataset settings, but the manifest bytes no longer match the ones
    // the checkpoint was trained on.
    let p = d.join("out/manifest.json");
    let text = fs::read_to_string(&p).unwrap();
    fs::write(&p, text.replacen('{', "{ ", 1)).unwrap();
    assert_eq!(code(d, &["eval"]), 6);
}

#[test]
fn manifest_for_a_different_chain_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen"]);
    let other = d.join("other.toml");
    fs::write(&other, SMALL.replace("n_sites = 5", "n_sites = 7")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swapattn"))
        .arg("--config")
        .arg(&other)
        .arg("--out")
        .arg(d.join("out"))
        .arg("train")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(6), "{}", String::from_utf8_lossy(&o.stderr));
}
