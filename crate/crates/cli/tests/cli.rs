//! End-to-end checks of the binary: artifact emission and exit codes.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpfbmc"))
}

#[test]
fn ber_run_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "ber",
            "--systems",
            "fbmc",
            "--profile",
            "awgn",
            "--grid",
            "8",
            "--frames",
            "2",
            "--n",
            "64",
            "--modulation",
            "4",
            "--filter",
            "phydyas",
            "--k",
            "4",
            "--workers",
            "2",
            "--plot",
            "--out-dir",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("ber.csv")).unwrap();
    assert!(csv.contains("# fingerprint="));
    assert!(csv.contains("sweep_value,system,metric,value"));
    assert!(csv.lines().any(|l| l.starts_with("8,fbmc,ber,")));
    assert!(dir.path().join("ber.svg").exists());
}

#[test]
fn config_error_exits_2() {
    let status = bin()
        .args([
            "ber",
            "--systems",
            "fbmc",
            "--profile",
            "no_such_profile",
            "--grid",
            "8",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // guards exceeding N is caught by validation too
    let status = bin()
        .args([
            "ber",
            "--systems",
            "fbmc",
            "--grid",
            "0.9",
            "--sweep",
            "cfo_norm",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn table_and_filter_export() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let status = bin()
        .args([
            "table", "--filter", "srrc", "--k", "8", "--n", "64", "--dn", "2", "--dm", "3",
        ])
        .arg("--out")
        .arg(&table)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 6);
    let coeffs = dir.path().join("h.csv");
    let status = bin()
        .args(["filter-export", "--filter", "iota", "--k", "4", "--n", "64"])
        .arg("--out")
        .arg(&coeffs)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&coeffs).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,coeff");
    assert_eq!(text.lines().count(), 1 + 256);
}
