//! End-to-end checks of the command-line surface: exit codes and artifact
//! production through the real binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_saradc"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().unwrap_or(-1)
}

#[test]
fn unknown_command_exits_2() {
    assert_eq!(code(bin().arg("frobnicate")), 2);
}

#[test]
fn unknown_policy_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = code(
        bin()
            .args(["eval", "--policy", "bogus", "--out"])
            .arg(dir.path()),
    );
    assert_eq!(c, 2);
}

#[test]
fn missing_config_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = code(
        bin()
            .args(["train", "--config", "/nonexistent/config.toml", "--out"])
            .arg(dir.path()),
    );
    assert_eq!(c, 3);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[scenario]\nn_vehicles = \"many\"\n").unwrap();
    let c = code(
        bin()
            .args(["train", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path()),
    );
    assert_eq!(c, 2);
}

#[test]
fn oversized_oracle_instance_exits_2() {
    // The default scenario's joint grid is far beyond the point budget.
    let dir = tempfile::tempdir().unwrap();
    let c = code(bin().args(["oracle", "--out"]).arg(dir.path()));
    assert_eq!(c, 2);
}

#[test]
fn summarize_without_files_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(bin().args(["summarize", "--out"]).arg(dir.path())), 2);
}

#[test]
fn train_eval_summarize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let run = |args: &[&str], out: &Path| {
        let mut cmd = bin();
        cmd.args(args).arg("--out").arg(out);
        let output = cmd.output().expect("binary runs");
        assert_eq!(
            output.status.code(),
            Some(0),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    run(&["train", "--seed", "5", "--episodes", "2"], out);
    assert!(out.join("checkpoint.txt").exists());
    assert!(out.join("reward_log.csv").exists());
    run(
        &["eval", "--seed", "5", "--policy", "sarad", "--episodes", "2"],
        out,
    );
    run(
        &["eval", "--seed", "5", "--policy", "fixed_dc", "--episodes", "2"],
        out,
    );
    run(&["sweep-mu", "--seed", "5"], out);
    let metrics_sarad = out.join("metrics_sarad.csv").display().to_string();
    let metrics_fixed = out.join("metrics_fixed_dc.csv").display().to_string();
    let sweep = out.join("sweep_mu.csv").display().to_string();
    run(
        &["summarize", &metrics_sarad, &metrics_fixed, &sweep],
        out,
    );
    assert!(out.join("summary.csv").exists());
    assert!(out.join("crossover.csv").exists());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().count() >= 3, "two policy rows expected");
    assert!(summary.contains("sarad") && summary.contains("fixed_dc"));
}
