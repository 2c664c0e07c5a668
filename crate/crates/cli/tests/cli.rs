//! Runs the binary on a coarse, shortened problem.

use std::process::Command;

fn hyperhydro() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperhydro"))
}

#[test]
fn report_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"m": 1, "short": true}"#).unwrap();
    let out = hyperhydro()
        .args([
            "--out",
            dir.path().to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "report",
            "--problem",
            "gresho",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("problem,mode,N_w"));
    assert!(dir.path().join("gresho/ceqp/manifest.json").exists());
    assert!(dir.path().join("gresho/beqp/steps.csv").exists());

    let out = hyperhydro()
        .args([
            "--out",
            dir.path().to_str().unwrap(),
            "verify",
            "--problem",
            "gresho",
            "--m",
            "1",
            "--short",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text
        .lines()
        .all(|l| l.starts_with("PASS") || !l.starts_with("FAIL")));
    assert!(text.contains("PASS gresho ceqp energy change"));

    let out = hyperhydro()
        .args([
            "--out",
            dir.path().to_str().unwrap(),
            "rom-run",
            "--problem",
            "gresho",
            "--m",
            "1",
            "--short",
            "--mode",
            "ceqp",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_arguments_fail() {
    let out = hyperhydro()
        .args(["report", "--problem", "noh"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = hyperhydro()
        .args(["full-run", "--e-sigma", "2"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
