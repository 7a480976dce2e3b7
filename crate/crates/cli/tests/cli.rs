use std::process::{Command, Output};

fn haartrunc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haartrunc"))
        .args(args)
        .env_remove("HAARTRUNC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn dft_sample_has_the_expected_entry() {
    let o = haartrunc(&["sample", "--ensemble", "dft", "--n", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text
        .lines()
        .find(|l| l.starts_with("4,0,2,2,"))
        .expect("entry (2,2) present");
    let f: Vec<f64> = row.split(',').skip(4).map(|x| x.parse().unwrap()).collect();
    assert!(f[0].abs() < 1e-15 && (f[1] + 0.5).abs() < 1e-15, "{row}");
}

#[test]
fn weights_are_doubly_stochastic() {
    let o = haartrunc(&["sample", "--ensemble", "orthogonal", "--n", "6", "--weights", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let w: Vec<Vec<f64>> = serde_json::from_value(doc["samples"][0]["sample"]["w"].clone()).unwrap();
    for i in 0..6 {
        let row: f64 = w[i].iter().sum();
        let col: f64 = w.iter().map(|r| r[i]).sum();
        assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = haartrunc(&["sample", "--n", "3", "--replicas", "5", "--seed", "11", "--threads", "1"]);
    let b = haartrunc(&["sample", "--n", "3", "--replicas", "5", "--seed", "11", "--threads", "3"]);
    let c = haartrunc(&["sample", "--n", "3", "--replicas", "5", "--seed", "12"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(haartrunc(&["suite", "--seed", "7", "--n", "0"]).status.code(), Some(1));
    assert_eq!(haartrunc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(haartrunc(&["sample", "--bogus"]).status.code(), Some(1));
    assert_eq!(haartrunc(&["sample", "--ensemble", "gaussian"]).status.code(), Some(1));
    assert_eq!(haartrunc(&["sample", "--grid", "0.5,2"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let o = haartrunc(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verify-moments"));
    assert_eq!(haartrunc(&["--version"]).status.code(), Some(0));
}

#[test]
fn decompose_check_passes() {
    let o = haartrunc(&["decompose-check", "--n", "8,16", "--replicas", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["checks"].as_array().unwrap().len(), 4 * 2 * 3);
}

#[test]
fn statistical_failure_exits_two_with_report() {
    // 50 replicas cannot push the KS distance below 0.05.
    let o = haartrunc(&["lindeberg", "--n", "8,16", "--replicas", "50"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    let report: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(report["status"], "fail");
    assert_eq!(report["verb"], "lindeberg");
    assert!(!report["failures"].as_array().unwrap().is_empty());
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let o = haartrunc(&[
        "verify-moments",
        "--ensemble",
        "orthogonal",
        "--replicas",
        "20000",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert!(lines.next().unwrap().starts_with("label,ensemble,n,"));
    assert!(text.contains("E|u11|^2,orthogonal,8,"));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"n": [5], "ensemble": "permutation"}"#).unwrap();
    let o = haartrunc(&["sample", "--weights", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let ones = stdout(&o)
        .lines()
        .filter(|l| l.starts_with("5,0,") && l.ends_with(",1.0000000000000000e0"))
        .count();
    assert_eq!(ones, 5);
    std::fs::write(&path, r#"{"colour": "red"}"#).unwrap();
    assert_eq!(haartrunc(&["sample", "--config", path.to_str().unwrap()]).status.code(), Some(1));
}
