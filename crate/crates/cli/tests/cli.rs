//! End-to-end checks of the `dbpsim` binary: exit codes, output schemas,
//! config handling, and run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn dbpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbpsim"))
        .args(args)
        .output()
        .expect("failed to launch binary")
}

fn stdout_utf8(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Strips the wall-time column so two runs of the same experiment compare equal.
fn without_seconds(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 8 && fields[0] != "snr_db" {
                let mut kept = fields.clone();
                kept[6] = "-";
                kept.join(",")
            } else {
                line.to_string()
            }
        })
        .collect()
}

#[test]
fn ber_emits_csv_with_stable_header() {
    let out = dbpsim(&[
        "ber",
        "--antennas",
        "8",
        "--users",
        "2",
        "--clusters",
        "1",
        "--snr-start",
        "0",
        "--snr-stop",
        "2",
        "--snr-step",
        "2",
        "--max-trials",
        "64",
        "--min-bit-errors",
        "10",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_utf8(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("snr_db,detector,partition,trials,bit_errors,ber,seconds,seed")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn ber_json_parses_and_reports_selected_detector() {
    let out = dbpsim(&[
        "ber",
        "--antennas",
        "8",
        "--users",
        "2",
        "--clusters",
        "1",
        "--detector",
        "mmse",
        "--snr-start",
        "-4",
        "--snr-stop",
        "-4",
        "--snr-step",
        "1",
        "--max-trials",
        "64",
        "--min-bit-errors",
        "10",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout_utf8(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["detector"], "mmse");
    assert_eq!(rows[0]["snr_db"], -4.0);
    assert!(rows[0]["ber"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_drives_run_and_cli_seed_wins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("experiment.toml");
    std::fs::write(
        &path,
        "antennas = 8\nusers = 2\nclusters = 1\ndetector = \"mrc\"\n\
         snr_start_db = 0.0\nsnr_stop_db = 0.0\nsnr_step_db = 1.0\n\
         max_trials = 64\nmin_bit_errors = 5\nseed = 11\n",
    )
    .unwrap();
    let out = dbpsim(&["ber", "--config", path.to_str().unwrap(), "--seed", "29"]);
    assert!(out.status.success());
    let text = stdout_utf8(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0,mrc,8,"), "row: {row}");
    assert!(row.ends_with(",29"), "seed override missing: {row}");
}

#[test]
fn invalid_config_fails_with_machine_readable_error() {
    let out = dbpsim(&[
        "ber",
        "--antennas",
        "8",
        "--users",
        "2",
        "--clusters",
        "7",
        "--max-trials",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("8 antennas"));
}

#[test]
fn results_can_be_written_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let out = dbpsim(&[
        "ber",
        "--antennas",
        "8",
        "--users",
        "2",
        "--clusters",
        "1",
        "--snr-start",
        "0",
        "--snr-stop",
        "0",
        "--snr-step",
        "1",
        "--max-trials",
        "32",
        "--min-bit-errors",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let written = std::fs::read_to_string(Path::new(path.to_str().unwrap())).unwrap();
    assert!(written.starts_with("snr_db,"));
    assert_eq!(written.lines().count(), 2);
}

#[test]
fn complexity_reports_pinned_operation_count() {
    let out = dbpsim(&["complexity", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout_utf8(&out);
    assert!(text.lines().next().unwrap().starts_with("detector,"));
    assert!(text.contains("gmp,154720"), "output: {text}");
    assert!(text.contains("gmp_decentralized_part,154560"));
    assert!(text.contains("gmp_centralized_part,160"));
}

#[test]
fn state_evolution_emits_expected_shape() {
    let out = dbpsim(&[
        "se",
        "--antennas",
        "120",
        "--users",
        "16",
        "--clusters",
        "3",
        "--snr",
        "0",
    ]);
    assert!(out.status.success());
    let state: serde_json::Value = serde_json::from_str(&stdout_utf8(&out)).unwrap();
    let v = state["belief_variance"].as_f64().unwrap();
    assert!(v > 0.0 && v < 1.0);
    assert_eq!(state["per_cluster"].as_array().unwrap().len(), 3);
}

#[test]
fn partition_analysis_reports_passing_checks() {
    let out = dbpsim(&["partition", "--clusters", "3", "--samples", "200"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_utf8(&out)).unwrap();
    assert_eq!(report["convex"], true);
    assert_eq!(report["jensen_violations"], 0);
}

#[test]
fn repeated_runs_match_except_wall_time() {
    let args = [
        "ber",
        "--antennas",
        "16",
        "--users",
        "4",
        "--clusters",
        "2",
        "--snr-start",
        "-4",
        "--snr-stop",
        "0",
        "--snr-step",
        "2",
        "--max-trials",
        "128",
        "--min-bit-errors",
        "20",
        "--seed",
        "13",
    ];
    let first = dbpsim(&args);
    let second = dbpsim(&args);
    assert!(first.status.success() && second.status.success());
    assert_eq!(
        without_seconds(&stdout_utf8(&first)),
        without_seconds(&stdout_utf8(&second))
    );
}
