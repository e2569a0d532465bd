use std::fs;
use std::process::Command;

fn cflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cflow"))
}

#[test]
fn verify_bdf_prints_tables() {
    let out = cflow().args(["verify-bdf", "--k", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("11/6"));
    assert!(text.contains("-3/2"));
    assert!(text.contains("holds"));
    assert!(text.contains("identity residual over 100"));
}

#[test]
fn verify_bdf_reports_failing_contraction() {
    let out = cflow().args(["verify-bdf", "--k", "5"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("fails"));
}

#[test]
fn verify_bdf_rejects_bad_order() {
    let out = cflow().args(["verify-bdf", "--k", "9"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}

#[test]
fn run_small_mesh() {
    let out = cflow()
        .args(["run", "--scheme", "af-bdf2", "--s", "2^-2", "--mesh", "4", "--eps", "1e-4", "--every", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().contains("Converged"));
}

#[test]
fn run_rejects_unknown_scheme() {
    let out = cflow().args(["run", "--scheme", "rk4", "--s", "0.1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
}

#[test]
fn study_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    let csv = dir.path().join("out.csv");
    fs::write(&cfg, "mesh = 4\nschemes = af-bdf1\ns = 2^-1, 2^-2\nt_max = 10\neps = 1e-5\n").unwrap();
    let run = |path: &std::path::Path| {
        cflow()
            .args(["study", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(path)
            .output()
            .unwrap()
    };
    assert!(run(&csv).status.success());
    let first = fs::read(&csv).unwrap();
    let again = dir.path().join("again.csv");
    assert!(run(&again).status.success());
    assert_eq!(first, fs::read(&again).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 3);
}

#[test]
fn study_with_empty_steps_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    let csv = dir.path().join("out.csv");
    fs::write(&cfg, "schemes = af-bdf2\ns =\n").unwrap();
    let out = cflow()
        .args(["study", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
    assert!(!csv.exists());
}
