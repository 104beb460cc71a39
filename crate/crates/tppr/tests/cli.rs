//! End-to-end tests of the installed binary: artifact parity between the
//! one-shot `run` and the equivalent subcommand chain, failure behavior,
//! and config/flag precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ARTIFACTS: [&str; 9] = [
    "graph.json",
    "anomaly.json",
    "ttp.json",
    "subgraph.json",
    "attspt.json",
    "scores.json",
    "scenario.json",
    "scenario.dot",
    "metrics.json",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tppr"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "tppr {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Generates a small scenario via the synth subcommand and returns the
/// paths of its input files.
fn synth_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let synth_dir = dir.join("synth");
    run_ok(&[
        "synth",
        "--chain-len",
        "6",
        "--benign",
        "40",
        "--noise",
        "0.1",
        "--seed",
        "3",
        "--out-dir",
        synth_dir.to_str().unwrap(),
    ]);
    for name in ["events.jsonl", "annotations.tsv", "gt.json", "sequences.txt"] {
        assert!(synth_dir.join(name).exists(), "synth did not write {name}");
    }
    (
        synth_dir.join("events.jsonl"),
        synth_dir.join("annotations.tsv"),
        synth_dir.join("gt.json"),
    )
}

#[test]
fn run_matches_the_subcommand_chain_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (events, annotations, gt) = synth_inputs(dir.path());
    let events = events.to_str().unwrap();
    let annotations = annotations.to_str().unwrap();
    let gt = gt.to_str().unwrap();

    let run_dir = dir.path().join("by_run");
    run_ok(&[
        "run",
        "--events",
        events,
        "--annotations",
        annotations,
        "--ground-truth",
        gt,
        "--theta",
        "0.4",
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]);

    let chain_dir = dir.path().join("by_chain");
    let out = chain_dir.to_str().unwrap();
    run_ok(&["ingest", "--events", events, "--out-dir", out]);
    run_ok(&["detect", "--events", events, "--out-dir", out]);
    run_ok(&[
        "annotate",
        "--events",
        events,
        "--annotations",
        annotations,
        "--out-dir",
        out,
    ]);
    run_ok(&["compress", "--events", events, "--out-dir", out]);
    run_ok(&["mine-patterns", "--out-dir", out]);
    run_ok(&["score", "--out-dir", out]);
    run_ok(&["reason", "--theta", "0.4", "--out-dir", out]);
    run_ok(&["evaluate", "--ground-truth", gt, "--out-dir", out]);

    for name in ARTIFACTS {
        let a = std::fs::read(run_dir.join(name)).unwrap();
        let b = std::fs::read(chain_dir.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between run and the chain");
    }
}

#[test]
fn missing_event_file_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["ingest", "--out-dir", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr was: {stderr}");
    assert!(stderr.contains("events"), "stderr was: {stderr}");
    assert!(!out_dir.join("graph.json").exists());
}

#[test]
fn nonexistent_event_path_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "ingest",
            "--events",
            "/no/such/events.jsonl",
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/no/such/events.jsonl"), "stderr was: {stderr}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (events, annotations, gt) = synth_inputs(dir.path());

    // theta = 0.99 discards every path; the scenario comes back empty.
    let config = dir.path().join("pipeline.conf");
    std::fs::write(
        &config,
        format!(
            "events = {}\nannotations = {}\nground_truth = {}\ntheta = 0.99 # retain almost nothing\n",
            events.display(),
            annotations.display(),
            gt.display()
        ),
    )
    .unwrap();

    let strict_dir = dir.path().join("strict");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        strict_dir.to_str().unwrap(),
    ]);
    let strict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(strict_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(strict["tp"], 0, "theta 0.99 should empty the scenario");
    assert_eq!(strict["empty_scenario"], true);

    // The --theta flag must win over the file value.
    let relaxed_dir = dir.path().join("relaxed");
    run_ok(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--theta",
        "0.4",
        "--out-dir",
        relaxed_dir.to_str().unwrap(),
    ]);
    let relaxed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(relaxed_dir.join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(relaxed["tp"], 6, "flag theta should recover the chain");
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "thetaa = 0.4\n").unwrap();
    let out = bin()
        .args([
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("thetaa"), "stderr was: {stderr}");
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "synth".to_string(),
            "--chain-len".into(),
            "5".into(),
            "--benign".into(),
            "15".into(),
            "--seed".into(),
            "9".into(),
            "--out-dir".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let first = dir.path().join("one");
    let second = dir.path().join("two");
    let third = dir.path().join("three");
    run_ok(&args(&first).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    run_ok(&args(&second).iter().map(|s| s.as_str()).collect::<Vec<_>>());
    let mut other_seed: Vec<String> = args(&third);
    let seed_pos = other_seed.iter().position(|a| a == "9").unwrap();
    other_seed[seed_pos] = "10".into();
    run_ok(&other_seed.iter().map(|s| s.as_str()).collect::<Vec<_>>());

    for name in ["events.jsonl", "annotations.tsv", "gt.json", "sequences.txt"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs for identical seeds");
    }
    assert_ne!(
        std::fs::read(first.join("events.jsonl")).unwrap(),
        std::fs::read(third.join("events.jsonl")).unwrap(),
        "different seeds should change the event stream"
    );
}

#[test]
fn stage_timings_are_logged_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _, _) = synth_inputs(dir.path());
    let out = run_ok(&[
        "run",
        "--events",
        events.to_str().unwrap(),
        "--theta",
        "0.4",
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--log-level",
        "info",
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    for stage in ["ingest", "detect", "compress", "reason"] {
        assert!(
            stderr.contains(&format!("stage {stage}")),
            "missing {stage} timing in: {stderr}"
        );
    }
}
