use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn reference_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.conf")
}

fn nagumo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nagumo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch nagumo")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Value of `key = value` in a plain text report.
fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .filter_map(|l| l.trim().split_once(" = "))
        .find(|(k, _)| *k == key)
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .1
        .parse()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    fs::write(dir.join("run.conf"), body).unwrap();
    "run.conf".into()
}

#[test]
fn thresholds_of_the_reference_set() {
    let tmp = TempDir::new().unwrap();
    let cfg = reference_config();
    let out = nagumo(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "o",
            "thresholds",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!((value(&text, "m0star") - 0.4 / 0.36).abs() < 1e-12);
    assert!((value(&text, "m1star") - 3.0).abs() < 1e-12);
    assert!(text.contains("verdict = main regime"));
    let saved = fs::read_to_string(tmp.path().join("o/thresholds.txt")).unwrap();
    assert!(saved.starts_with("# command = \"thresholds\""));
}

#[test]
fn thresholds_report_violated_h0() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g = 0.1\na = 0.6\nn0 = 0.5\nn1 = 200\nalpha = 2.7\nbeta = 5.7\n",
    );
    let out = nagumo(tmp.path(), &["--config", &cfg, "--out", "o", "thresholds"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!((value(&text, "m0star") - 2.5).abs() < 1e-12);
    assert!(text.contains("verdict = H0 violated"));
}

#[test]
fn figure_metadata() {
    let tmp = TempDir::new().unwrap();
    let out = nagumo(tmp.path(), &["--out", "o", "figure", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let meta = fs::read_to_string(tmp.path().join("o/fig3_meta.txt")).unwrap();
    assert!((value(&meta, "c") + 0.00850436).abs() < 1e-8);
    assert!((value(&meta, "a_n1") - 0.417157).abs() < 1e-6);

    let out = nagumo(tmp.path(), &["--out", "o", "figure", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let meta = fs::read_to_string(tmp.path().join("o/fig5_meta.txt")).unwrap();
    assert!((value(&meta, "pbar0_plus") - 0.652494).abs() < 1e-6);

    let out = nagumo(tmp.path(), &["--out", "o", "figure", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("o/fig1.csv").exists());

    let out = nagumo(tmp.path(), &["--out", "o", "figure", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g = 0.1\na = 0.4\nn0 = 0.5\n");
    let out = nagumo(tmp.path(), &["--config", &cfg, "--out", "o", "certify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`n1`"));

    let cfg = write_config(tmp.path(), "g = 0.1\na = 0.4\nfoo = 1\n");
    let out = nagumo(tmp.path(), &["--config", &cfg, "thresholds"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run.conf:3: unknown key `foo`"));

    let out = nagumo(tmp.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_fails_at_regime_when_n0_is_too_large() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g = 0.1\na = 0.4\nn0 = 1.5\nn1 = 200\nalpha = 2.7\nbeta = 5.7\npbar0 = 0.075\n",
    );
    let out = nagumo(tmp.path(), &["--config", &cfg, "--out", "o", "certify"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("regime"));
    assert!(tmp.path().join("o/certificate.txt").exists());
}

#[test]
fn find_periodic_checks_its_input() {
    let tmp = TempDir::new().unwrap();
    let cfg = reference_config();
    let cfg = cfg.to_str().unwrap();
    let out = nagumo(
        tmp.path(),
        &["--config", cfg, "--out", "o", "find-periodic", "3"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = nagumo(
        tmp.path(),
        &["--config", cfg, "--out", "o", "find-periodic", "1"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("certif"));

    let out = nagumo(
        tmp.path(),
        &[
            "--config",
            cfg,
            "--out",
            "o",
            "--force",
            "find-periodic",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("o/periodic_1.txt")).unwrap();
    assert!(text.contains("passed = true"));
}

#[test]
fn certify_then_find_periodic() {
    let tmp = TempDir::new().unwrap();
    let cfg = reference_config();
    let cfg = cfg.to_str().unwrap();
    let out = nagumo(
        tmp.path(),
        &["--config", cfg, "--out", "o", "--paths", "8", "certify"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("passed = true"));
    let cert = fs::read_to_string(tmp.path().join("o/certificate.txt")).unwrap();
    assert!(cert.contains("passed = true"));

    let out = nagumo(
        tmp.path(),
        &["--config", cfg, "--out", "o", "find-periodic", "1,2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/periodic_1-2.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn empty_scan_writes_only_the_header() {
    let tmp = TempDir::new().unwrap();
    let mut body = fs::read_to_string(reference_config()).unwrap();
    body.push_str("scan_alpha = [2.0, 3.0, 0]\n");
    let cfg = write_config(tmp.path(), &body);
    let out = nagumo(tmp.path(), &["--config", &cfg, "--out", "o", "scan"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = fs::read_to_string(tmp.path().join("o/scan.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("alpha,beta_used,"));
}

#[test]
fn outputs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = reference_config();
    let cfg = cfg.to_str().unwrap();
    for dir in ["first", "second"] {
        let out = nagumo(tmp.path(), &["--config", cfg, "--out", dir, "timemap"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for name in ["sigma.csv", "tau.csv", "timemap_oracle.csv"] {
        let strip = |dir: &str| {
            fs::read_to_string(tmp.path().join(dir).join(name))
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("# out"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip("first"), strip("second"), "{name}");
    }
}
