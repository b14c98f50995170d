//! End-to-end checks of the runner: exit-code discipline, byte-identical
//! artifacts under a fixed seed, and calibration provenance refusal.

use std::path::Path;
use std::process::Command;

fn lampwalk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lampwalk"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn records_runs_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let status = lampwalk()
        .args(["records", "--seed", "3", "--out"])
        .arg(dir.path())
        .args(["--set", "trials=1500"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(dir.path(), "records.csv");
    assert!(csv.starts_with("k,T_k,R_k,simple\n"));
    let report = read(dir.path(), "records_report.json");
    assert!(report.contains("\"subcommand\": \"records\""));
    assert!(report.contains("\"seed\": 3"));
}

#[test]
fn same_seed_gives_byte_identical_artifacts() {
    let run = |dir: &Path| {
        let status = lampwalk()
            .args(["records", "--seed", "11", "--out"])
            .arg(dir)
            .args(["--set", "trials=1500"])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for name in ["records.csv", "simplicity_decay.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn statistical_failure_exits_two() {
    // an impossible threshold turns a healthy estimate into a statistical fail
    let dir = tempfile::tempdir().unwrap();
    let status = lampwalk()
        .args(["switching-freq", "--seed", "5", "--out"])
        .arg(dir.path())
        .args(["--set", "paths=1000", "--set", "n_list=10", "--set", "freq_threshold=0.999"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn config_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let status = lampwalk()
        .args(["no-such-subcommand", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status2 = lampwalk()
        .args(["records", "--out"])
        .arg(dir.path())
        .args(["--set", "trials=notanumber"])
        .status()
        .unwrap();
    assert_eq!(status2.code(), Some(1));
}

#[test]
fn calibration_provenance_is_refused_on_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    // produce a calibration with seed 21
    let status = lampwalk()
        .args(["calibrate", "--seed", "21", "--out"])
        .arg(dir.path())
        .args(["--set", "k_max=1"])
        .status()
        .unwrap();
    assert!(status.success());
    let calib_file = dir.path().join("calibration.txt");
    assert!(calib_file.exists());

    // an experiment claiming a different calibration seed must refuse to run
    let out2 = tempfile::tempdir().unwrap();
    let status2 = lampwalk()
        .args(["walk", "--seed", "21", "--out"])
        .arg(out2.path())
        .args(["--set", "source=mutau", "--set", "n_steps=4"])
        .arg("--set")
        .arg(format!("calibration={}", calib_file.display()))
        .args(["--set", "calibration_seed=999"])
        .status()
        .unwrap();
    assert_eq!(status2.code(), Some(1), "mismatched calibration seed accepted");

    // with matching provenance it runs
    let out3 = tempfile::tempdir().unwrap();
    let status3 = lampwalk()
        .args(["walk", "--seed", "21", "--out"])
        .arg(out3.path())
        .args(["--set", "source=mutau", "--set", "n_steps=4"])
        .arg("--set")
        .arg(format!("calibration={}", calib_file.display()))
        .args(["--set", "calibration_seed=21"])
        .status()
        .unwrap();
    assert!(status3.success());
}

#[test]
fn calibrate_never_modified_by_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let status = lampwalk()
        .args(["calibrate", "--seed", "31", "--out"])
        .arg(dir.path())
        .args(["--set", "k_max=1"])
        .status()
        .unwrap();
    assert!(status.success());
    let calib_file = dir.path().join("calibration.txt");
    let before = read(dir.path(), "calibration.txt");

    let out2 = tempfile::tempdir().unwrap();
    let status2 = lampwalk()
        .args(["hitting", "--seed", "31", "--out"])
        .arg(out2.path())
        .args(["--set", "paths=2000", "--set", "calibration_seed=31"])
        .arg("--set")
        .arg(format!("calibration={}", calib_file.display()))
        .status()
        .unwrap();
    assert!(status2.success());
    assert_eq!(before, read(dir.path(), "calibration.txt"));
}
