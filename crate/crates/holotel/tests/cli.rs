use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use holotel::pgm::{Encoding, Gray};

fn holotel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holotel"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ellipse_writes_csv_and_lists_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = holotel(&["ellipse", "--count", "5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.trim(), s(&dir.path().join("ellipse.csv")));
    assert!(out.stderr.is_empty());
    let csv = fs::read_to_string(dir.path().join("ellipse.csv")).unwrap();
    assert!(csv.starts_with("omega,psi,r,major,minor\n-5,"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    let neg = holotel(&["covariance", "--sigma", "-1", "--out", d]);
    assert_eq!(neg.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&neg.stderr).contains("opa.sigma"));
    assert!(neg.stdout.is_empty());

    let no_seed = holotel(&["mc-validate", "--out", d]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("mc.seed"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"mc": {"sampels": 3}}"#).unwrap();
    let unknown = holotel(&["ellipse", "--config", s(&cfg), "--out", d]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("mc.sampels"));
}

#[test]
fn file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"opa": {"sigma": 3}, "grid": {"delta": 1, "t_window": 1}}"#,
    )
    .unwrap();
    let out = holotel(&[
        "covariance",
        "--config",
        s(&cfg),
        "--sigma",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("covariance.csv")).unwrap();
    let c: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(4)
        .unwrap()
        .parse()
        .unwrap();
    assert!((c - 2.532_635_7).abs() < 1e-3, "{c}");
}

#[test]
fn starved_quadrature_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"quadrature": {"tol": 1e-10, "max_subdivisions": 2}, "grid": {"delta": 5, "t_window": 5}}"#,
    )
    .unwrap();
    let out = holotel(&["covariance", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn classical_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = holotel(&[
        "mc-validate",
        "--sigma",
        "0",
        "--seed",
        "5",
        "--samples",
        "2000",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("mc_validate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn teleport_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("in.pgm");
    Gray {
        width: 3,
        height: 2,
        maxval: 255,
        data: vec![0, 50, 100, 150, 200, 255],
    }
    .write(&img, Encoding::Plain)
    .unwrap();
    let run = |threads: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = holotel(&[
            "teleport",
            "--image",
            s(&img),
            "--sigma",
            "1",
            "--seed",
            "3",
            "--samples",
            "40",
            "--threads",
            threads,
            "--out",
            s(&out_dir),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        ["mean.pgm", "sample.pgm", "fidelity.csv"].map(|f| fs::read(out_dir.join(f)).unwrap())
    };
    let a = run("1", "a");
    let b = run("3", "b");
    assert_eq!(a, b);
    let mean = Gray::parse(&a[0]).unwrap();
    assert_eq!((mean.width, mean.height, mean.maxval), (3, 2, 65535));
    let fid = String::from_utf8(a[2].clone()).unwrap();
    assert!(fid.starts_with("j_x,j_y,c_diag,fidelity\n0,0,"));
    assert_eq!(fid.lines().count(), 7);
}

#[test]
fn compensate_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = holotel(&[
        "compensate",
        "--pixel-size",
        "3",
        "--t-window",
        "3",
        "--degree",
        "1",
        "--budget",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("profile.json")).unwrap())
            .unwrap();
    assert_eq!(json["coeffs"].as_array().unwrap().len(), 1);
    let summary = fs::read_to_string(dir.path().join("compensation.csv")).unwrap();
    assert!(summary.starts_with("case,c_diag\nuncompensated,"));
    let again = holotel(&[
        "covariance",
        "--profile",
        s(&dir.path().join("profile.json")),
        "--pixel-size",
        "3",
        "--t-window",
        "3",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(again.status.code(), Some(0));
}
