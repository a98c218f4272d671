use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use calib::experiment::RunReport;
use calib::manifest::{RunKind, RunManifest};

fn calib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(args)
        .env_remove("CALIB_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 8] = [
    "--per-class",
    "30",
    "--epochs",
    "4",
    "--lr",
    "0.05",
    "--dim",
    "4",
];

fn train(out: &Path, mode: &str, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["train", "--mode", mode, "--out", out];
    args.extend(SMALL);
    args.extend(extra);
    calib(&args)
}

#[test]
fn eval_prints_hand_computed_ece() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.jsonl");
    fs::write(
        &path,
        "{\"probs\": [0.9, 0.1], \"label\": 0}\n{\"probs\": [0.2, 0.8], \"label\": 1}\n",
    )
    .unwrap();
    let out = calib(&[
        "eval",
        "--predictions",
        path.to_str().unwrap(),
        "--bins",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("ECE: 0.15000"), "{}", stdout(&out));
}

#[test]
fn eval_writes_diagram_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(
        &path,
        "p0,p1,p2,label\n0.2,0.5,0.3,1\n0.6,0.3,0.1,2\n0.1,0.1,0.8,2\n",
    )
    .unwrap();
    let svg = dir.path().join("d.svg");
    let out = calib(&[
        "eval",
        "--predictions",
        path.to_str().unwrap(),
        "--diagram",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(fs::read_to_string(&svg).unwrap().contains("M = 15 bins"));
    let manifest = RunManifest::load(dir.path().join("d.run.json")).unwrap();
    assert!(matches!(manifest.run, RunKind::Eval(ref e) if e.bins == 15));
}

#[test]
fn vanilla_run_records_zero_weight_every_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(dir.path(), "vanilla", &["--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in [
        "run.json",
        "report.json",
        "predictions.jsonl",
        "reliability.svg",
        "model.json",
        "timing.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.training.epochs.len(), 4);
    assert!(report.training.epochs.iter().all(|e| e.ece_weight == 0.0));
}

#[test]
fn training_is_idempotent_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert_eq!(
        train(&a, "curriculum", &["--seed", "3"]).status.code(),
        Some(0)
    );
    assert_eq!(
        train(&b, "curriculum", &["--seed", "3"]).status.code(),
        Some(0)
    );
    let replay = calib(&[
        "replay",
        a.join("run.json").to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(replay.status.code(), Some(0), "{}", stderr(&replay));
    for f in [
        "run.json",
        "report.json",
        "predictions.jsonl",
        "reliability.svg",
        "model.json",
    ] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let manifest = RunManifest::load(a.join("run.json")).unwrap();
    assert_eq!(manifest.seed, 3);
    let RunKind::Train(spec) = manifest.run else {
        panic!()
    };
    assert!(spec.train.loss.gamma_e > 0.0);
    assert!(matches!(
        spec.gamma,
        calib::manifest::GammaSource::Auto { .. }
    ));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["train", "--out", out];
    args.extend(SMALL);
    let status = Command::new(env!("CARGO_BIN_EXE_calib"))
        .args(&args)
        .env("CALIB_SEED", "17")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        RunManifest::load(dir.path().join("run.json")).unwrap().seed,
        17
    );
}

#[test]
fn experiment_then_compare_gives_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let mut args = vec!["experiment", "--out", root, "--gamma", "1.0"];
    args.extend(SMALL);
    let out = calib(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("comparison.md").exists());

    let runs: Vec<String> = ["vanilla", "curriculum", "fixed"]
        .iter()
        .map(|a| dir.path().join(a).to_str().unwrap().to_string())
        .collect();
    let mut args = vec!["compare"];
    args.extend(runs.iter().map(String::as_str));
    let out = calib(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = stdout(&out);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "| Model | P(%) | R(%) | F1(%) | ACC(%) | ECE |");
    assert!(lines[2].starts_with("| vanilla |"));
    assert!(lines[3].starts_with("| curriculum |"));
    assert!(lines[4].starts_with("| fixed |"));
    assert_eq!(
        table,
        fs::read_to_string(dir.path().join("comparison.md")).unwrap()
    );
}

#[test]
fn diagram_subcommand_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    fs::write(&path, "{\"probs\": [0.9, 0.1], \"label\": 0}\n").unwrap();
    let svg = dir.path().join("out.svg");
    let args = [
        "diagram",
        "--predictions",
        path.to_str().unwrap(),
        "--bins",
        "10",
        "--out",
        svg.to_str().unwrap(),
    ];
    assert_eq!(calib(&args).status.code(), Some(0));
    let first = fs::read(&svg).unwrap();
    assert_eq!(calib(&args).status.code(), Some(0));
    assert_eq!(first, fs::read(&svg).unwrap());
    assert!(dir.path().join("out.run.json").exists());
}

#[test]
fn usage_errors_exit_two_with_help() {
    let out = calib(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert_eq!(calib(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        calib(&["train", "--mode", "sideways", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(calib(&["--help"]).status.code(), Some(0));
}

#[test]
fn failures_exit_one() {
    let out = calib(&["eval", "--predictions", "/definitely/missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not found"), "{}", stderr(&out));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"probs\": [0.5, 0.5], \"label\": 0}\n{\"probs\": [0.9, 0.9], \"label\": 0}\n",
    )
    .unwrap();
    let out = calib(&["eval", "--predictions", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = train(dir.path(), "fixed", &["--se", "10"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}
