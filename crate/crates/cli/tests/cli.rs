//! End-to-end runs of the `sebd` binary.

use std::{
    path::Path,
    process::{Command, Output},
};

use sebd_cli::CliError;

fn sebd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sebd")).args(args).current_dir(dir).env_remove("SEBD_WORKERS").output().unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

const SMALL: [&str; 8] = ["--n", "6", "--time", "2", "--samples", "10", "--observables", "sx,czz@1"];

#[test]
fn sebd_run_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = sebd(&[&["run", "--output", "est.csv"][..], &SMALL].concat(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = read(&dir.path().join("est.csv"));
    let mut lines = est.lines();
    assert_eq!(lines.next(), Some("time,site_or_bond,quantity,mean,variance,stderr,n_samples"));
    assert!(est.lines().any(|l| l.starts_with("2,3,sx:em,")));
    assert!(est.lines().any(|l| l.starts_with("2,,peak_entropy,")));
    let prof = read(&dir.path().join("est.profiles.csv"));
    assert_eq!(prof.lines().next(), Some("time,bond,entropy_pre,entropy_post,chi_pre"));
    assert_eq!(prof.lines().count(), 1 + 5);
}

#[test]
fn tebd_rows_are_exact_and_profiles_have_no_post_column_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = sebd(&[&["run", "--engine", "tebd", "--times", "1,2", "--output", "t.csv"][..], &SMALL].concat(), dir.path());
    assert!(out.status.success());
    let est = read(&dir.path().join("t.csv"));
    assert!(est.lines().skip(1).all(|l| l.ends_with(",0,0,1")), "{est}");
    let prof = read(&dir.path().join("t.profiles.csv"));
    assert_eq!(prof.lines().count(), 1 + 2 * 5);
    assert!(prof.lines().skip(1).all(|l| l.split(',').nth(3) == Some("")));
}

#[test]
fn json_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let out = sebd(&[&["run", "--format", "json", "--output", "e.json"][..], &SMALL].concat(), dir.path());
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&read(&dir.path().join("e.json"))).unwrap();
    let first = &rows.as_array().unwrap()[0];
    for key in ["time", "site_or_bond", "quantity", "mean", "variance", "stderr", "n_samples"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let prof: serde_json::Value = serde_json::from_str(&read(&dir.path().join("e.profiles.json"))).unwrap();
    assert_eq!(prof.as_array().unwrap().len(), 5);
}

#[test]
fn flags_override_config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# small run\nn = 6\ntime = 1\nsamples = 4\nobservables = sz\noutput = from_file.csv\n")
        .unwrap();
    let out = sebd(&["run", "--config", "run.cfg", "--time", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = read(&dir.path().join("from_file.csv"));
    assert!(est.lines().skip(1).all(|l| l.starts_with("2,")));
    assert!(est.lines().any(|l| l.ends_with(",4") && l.contains("sz:em")));

    let env = Command::new(env!("CARGO_BIN_EXE_sebd"))
        .args(["run", "--config", "run.cfg", "--output", "env.csv"])
        .current_dir(dir.path())
        .env("SEBD_WORKERS", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_sebd"))
        .args(["run", "--config", "run.cfg"])
        .current_dir(dir.path())
        .env("SEBD_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn configuration_and_io_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--observables", "sq"][..],
        &["run", "--n", "1"],
        &["run", "--engine", "mps"],
        &["run", "--basis", "x", "--observables", "sz:bitstring"],
        &["run", "--output", "missing_dir/out.csv"],
        &["run", "--config", "nope.cfg"],
    ] {
        let out = sebd(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    assert_eq!(sebd(&["run", "--config", "bad.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn exit_codes_by_error_class() {
    assert_eq!(CliError::Config(String::new()).exit_code(), 2);
    assert_eq!(CliError::Verification(String::new()).exit_code(), 3);
    assert_eq!(CliError::Capacity(String::new()).exit_code(), 4);
    assert_eq!(CliError::Core(sebd_core::Error::Capacity(String::new())).exit_code(), 4);
}

#[test]
fn dump_schedule_prints_cones() {
    let dir = tempfile::tempdir().unwrap();
    let out = sebd(&["run", "--dump-schedule", "--n", "4", "--time", "1"], dir.path());
    assert!(out.status.success());
    let cones: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cones.as_array().unwrap().len(), 2);
    assert!(!dir.path().join("sebd_output.csv").exists());
}

#[test]
fn verify_reports_all_checks_passing() {
    let dir = tempfile::tempdir().unwrap();
    let out = sebd(&["verify"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() > 5);
}
