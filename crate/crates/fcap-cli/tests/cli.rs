//! End-to-end runs of the `fcap` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fcap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FCAP_THREADS")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn capacity_of_the_unit_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcap(
        &[
            "capacity",
            "--norm",
            "euclidean",
            "--body",
            "wulff:1",
            "--p",
            "2",
            "--dim",
            "3",
            "--grid",
            "24",
            "--rout",
            "4,6",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(dir.path());
    assert_eq!(m["q"].as_f64(), Some(-1.0));
    let cap = m["solves"][0]["capacity"].as_f64().unwrap();
    assert!(
        (cap / (2.0 * std::f64::consts::PI) - 1.0).abs() < 3e-2,
        "capacity {cap}"
    );
    assert_eq!(m["checks"][0]["check"], "radial");
    assert_eq!(m["checks"][0]["verdict"], "consistent");
    assert!(dir.path().join("check-00-radial.json").exists());
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn malformed_norm_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fcap(
        &["capacity", "--norm", "lq:abc", "--body", "wulff:1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("abc"));
}

#[test]
fn invalid_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["capacity", "--body", "wulff:1", "--p", "3"],
        vec!["capacity", "--body", "wulff:1", "--grid", "8"],
        vec!["capacity", "--body", "wulff:1", "--rout", "6,4"],
        vec!["capacity", "--body", "sphere:1"],
    ] {
        let out = fcap(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn reruns_are_byte_identical_and_export_the_field() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "annulus",
        "--body",
        "box:0.3,0.3,0.5",
        "--R",
        "2",
        "--grid",
        "20",
        "--export-field",
        "--threads",
        "2",
    ];
    for d in [&a, &b] {
        let out = fcap(&args, d.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["manifest.json", "field.csv", "field.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    // The annulus pipeline runs no checks.
    assert_eq!(manifest(a.path())["checks"], Value::Array(vec![]));
    let csv = fs::read_to_string(a.path().join("field.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,z,u"));
    assert!(csv.lines().count() > 1000);
}

#[test]
fn violated_checks_exit_with_two() {
    // The stated outer-boundary constant is not met by the Wulff annulus.
    let dir = tempfile::tempdir().unwrap();
    let out = fcap(
        &[
            "overdetermined",
            "--body",
            "wulff:0.5",
            "--R",
            "2",
            "--grid",
            "48",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(dir.path());
    assert_eq!(m["status"], "violated");
    assert_eq!(m["checks"][0]["verdict"], "violated");
}
