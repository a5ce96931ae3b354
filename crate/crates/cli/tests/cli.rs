use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn subdiff(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
        .args(args)
        .current_dir(dir)
        .env("SUBDIFF_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eigen_reports_principal_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let o = subdiff(dir.path(), &["eigen"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let value: f64 = line.trim().strip_prefix("lambda_star=").unwrap().parse().unwrap();
    assert!((value - 9.8694).abs() < 1e-3, "{value}");
    let csv = fs::read_to_string(dir.path().join("eigen.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,psi"));
    assert_eq!(csv.lines().count(), 200);
}

#[test]
fn stability_scan_classifies_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), "[params]\nc_values = 5, 15\n").unwrap();
    let o = subdiff(dir.path(), &["stability-scan", "--config", "s.cfg"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("c=5 decay"), "{out}");
    assert!(out.contains("c=15 growth"), "{out}");
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "[kernel]\nalpha = 1.5\n").unwrap();
    let o = subdiff(dir.path(), &["relax", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error kind=config"), "{err}");
    assert!(!dir.path().join("relax.csv").exists());
}

#[test]
fn missing_config_file_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = subdiff(dir.path(), &["relax", "--config", "absent.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("q.cfg"),
        "[grid]\ntau = 1e-3\nhorizon = 1\n\n[nonlinearity]\nf = quadratic\n\n[initial]\nvalue = 2\n",
    )
    .unwrap();
    let first = subdiff(dir.path(), &["ode", "--config", "q.cfg", "--out", "a.csv"]);
    let second = subdiff(dir.path(), &["ode", "--config", "q.cfg", "--out", "b.csv"]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(stdout(&first), stdout(&second));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with(b"step,t,u\n"));
}
