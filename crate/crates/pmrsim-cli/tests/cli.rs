//! End-to-end checks of the command-line interface: flags, exit codes, and
//! artifact determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pmrsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmrsim"))
}

fn run(args: &[&str]) -> Output {
    pmrsim().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn validate_accepts_a_template() {
    let out = run(&["--template", "fig2", "--validate"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "ok");
}

#[test]
fn shipped_scenarios_validate() {
    let dir = scenarios_dir();
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).expect("scenarios directory exists") {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        count += 1;
        let out = run(&["--scenario", path.to_str().unwrap(), "--validate"]);
        assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
        assert_eq!(stdout(&out).trim(), "ok", "{}", path.display());
    }
    assert_eq!(count, 4, "expected the four template scenarios in {}", dir.display());
}

#[test]
fn missing_source_is_a_config_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nothing to run"));
}

#[test]
fn invalid_override_exits_two_and_cites_the_field() {
    let out = run(&["--template", "fig2", "--set", "cells.mbsfn_subframes=7", "--validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cells[0].mbsfn_subframes"));
}

#[test]
fn plain_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--template", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["scenario.toml", "setup.csv", "decisions.csv", "trace.log"] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let snapshot = std::fs::read_to_string(dir.path().join("scenario.toml")).unwrap();
    assert!(snapshot.contains("duration_ms = 60000"));
}

#[test]
fn seed_flag_is_captured_and_changes_results() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let a = run(&["--template", "fig2", "--seed", "1", "--out", dir1.path().to_str().unwrap()]);
    let b = run(&["--template", "fig2", "--seed", "2", "--out", dir2.path().to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    let snap = std::fs::read_to_string(dir1.path().join("scenario.toml")).unwrap();
    assert!(snap.contains("seed = 1"));
    let setup1 = std::fs::read_to_string(dir1.path().join("setup.csv")).unwrap();
    let setup2 = std::fs::read_to_string(dir2.path().join("setup.csv")).unwrap();
    assert_ne!(setup1, setup2);
}

#[test]
fn experiment_rerun_is_byte_identical_across_job_counts() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let a = run(&["--experiment", "fig4", "--jobs", "1", "--out", dir1.path().to_str().unwrap()]);
    let b = run(&["--experiment", "fig4", "--jobs", "3", "--out", dir2.path().to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    let csv1 = std::fs::read(dir1.path().join("setup_latency.csv")).unwrap();
    let csv2 = std::fs::read(dir2.path().join("setup_latency.csv")).unwrap();
    assert_eq!(csv1, csv2);
}

#[test]
fn requirement_check_exit_codes() {
    let pass_dir = tempfile::tempdir().unwrap();
    let pass = run(&["--experiment", "req-matrix", "--out", pass_dir.path().to_str().unwrap()]);
    assert_eq!(pass.status.code(), Some(0), "{}", stderr(&pass));
    let table = std::fs::read_to_string(pass_dir.path().join("requirements.csv")).unwrap();
    assert!(!table.contains(",false"));

    let fail_dir = tempfile::tempdir().unwrap();
    let fail = run(&[
        "--experiment",
        "req-matrix",
        "--set",
        "cells.bandwidth_mhz=5",
        "--set",
        "model.bandwidth_mhz=5",
        "--set",
        "groups.service=video",
        "--out",
        fail_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(fail.status.code(), Some(1), "{}", stderr(&fail));
    let table = std::fs::read_to_string(fail_dir.path().join("requirements.csv")).unwrap();
    assert!(table.contains("admission") && table.contains(",false"));
}

#[test]
fn env_var_overrides_out_flag() {
    let chosen = tempfile::tempdir().unwrap();
    let ignored = tempfile::tempdir().unwrap();
    let out = pmrsim()
        .args(["--experiment", "fig5", "--out", ignored.path().to_str().unwrap()])
        .env("PMRSIM_OUT", chosen.path())
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(chosen.path().join("spectral_efficiency.csv").exists());
    assert!(!ignored.path().join("spectral_efficiency.csv").exists());
}
