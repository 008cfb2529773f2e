use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn phasenoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasenoise"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_paths_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("trace.csv");
    let args = [
        "simulate",
        "--hurst",
        "1.0",
        "--t0",
        "100",
        "--t1",
        "200",
        "--n",
        "100",
        "--paths",
        "10",
        "--seed",
        "7",
        "--out",
        path_str(&file),
    ];
    let out = phasenoise(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# dt="));
    assert_eq!(lines[1].split(',').count(), 10);
    assert_eq!(lines.len(), 102);

    // identical argv and seed give identical bytes
    let again = dir.path().join("again.csv");
    let mut args2 = args;
    args2[14] = path_str(&again);
    assert!(phasenoise(&args2).status.success());
    assert_eq!(fs::read(&file).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn entropy_report() {
    let out = phasenoise(&[
        "entropy",
        "--c-white",
        "1",
        "--c-flicker",
        "0.5",
        "--dt",
        "1e-6",
        "--alpha",
        "0.5",
    ]);
    let v = json(&out);
    let sigma2 = v["sigma2"].as_f64().unwrap();
    // 1e-6 + 0.25 * 1e-12 * 2/pi
    assert!((sigma2 - (1e-6 + 0.25e-12 * 2.0 / std::f64::consts::PI)).abs() < 1e-20);
    let bias = v["bias"].as_f64().unwrap();
    let h = v["min_entropy_bits"].as_f64().unwrap();
    assert!((h + (0.5 + bias).log2()).abs() < 1e-15);
    assert_eq!(v["per_component"].as_array().unwrap().len(), 2);
}

#[test]
fn entropy_target_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let out = phasenoise(&[
        "entropy",
        "--hurst",
        "0.5",
        "--dt",
        "1",
        "--target",
        "0.999",
        "--curves",
        path_str(&curves),
        "--points",
        "20",
    ]);
    let v = json(&out);
    let dt = v["min_dt"].as_f64().unwrap();
    assert!(dt > 1.0 && dt < 100.0);
    let text = fs::read_to_string(&curves).unwrap();
    assert_eq!(text.lines().next().unwrap(), "sigma2,bias,min_entropy");
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn calibrate_recovers_white_flicker() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("long.csv");
    let out = phasenoise(&[
        "simulate",
        "--c-white",
        "1",
        "--c-flicker",
        "0.5",
        "--dt",
        "1",
        "--n",
        "200000",
        "--seed",
        "3",
        "--out",
        path_str(&file),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&phasenoise(&[
        "calibrate",
        "--in",
        path_str(&file),
        "--lags",
        "1:100",
    ]));
    let w = v["c_white"].as_f64().unwrap();
    let f = v["c_flicker"].as_f64().unwrap();
    assert!((w - 1.0).abs() < 0.1, "{v}");
    assert!((f - 0.5).abs() < 0.05, "{v}");

    let avar = phasenoise(&[
        "avar",
        "--in",
        path_str(&file),
        "--lags",
        "1,10,100",
        "--f0",
        "1e6",
    ]);
    assert!(avar.status.success());
    let text = stdout(&avar);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "lag_s,var,var_normalized,count");
    assert_eq!(rows.len(), 4);
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[3], "199998");
    assert!(!cells[2].is_empty());
}

#[test]
fn raw_trace_needs_dt() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.bin");
    let bytes: Vec<u8> = (0..64)
        .flat_map(|i| (i as f64).sqrt().to_le_bytes())
        .collect();
    fs::write(&file, bytes).unwrap();
    let out = phasenoise(&[
        "avar",
        "--in",
        path_str(&file),
        "--format",
        "raw-f64-le",
        "--lags",
        "1:3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = phasenoise(&[
        "avar",
        "--in",
        path_str(&file),
        "--format",
        "raw-f64-le",
        "--dt",
        "1e-8",
        "--lags",
        "1:3",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn scalar_reports() {
    let v = json(&phasenoise(&[
        "covariance",
        "--hurst",
        "0.5",
        "--s",
        "3",
        "--t",
        "5",
    ]));
    assert_eq!(v["covariance"].as_f64().unwrap(), 3.0);
    let v = json(&phasenoise(&["leakage", "--hurst", "0.5", "--gap", "2"]));
    assert_eq!(v["variance"].as_f64().unwrap(), 2.0);
}

#[test]
fn curve_outputs() {
    let out = phasenoise(&[
        "spectrum", "--hurst", "1", "--time", "100", "--points", "10",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "omega,value,branch");
    assert_eq!(text.lines().count(), 11);

    let out = phasenoise(&["covariance", "--hurst", "1", "--curve", "--points", "5"]);
    assert_eq!(stdout(&out).lines().count(), 6);

    let out = phasenoise(&[
        "bandwidth",
        "--c-white",
        "1e-3",
        "--c-flicker",
        "1e-2",
        "--points",
        "50",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let entropies: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(entropies.len(), 50);
    assert!(entropies.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn exit_codes() {
    assert_eq!(phasenoise(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(phasenoise(&["entropy", "--dt"]).status.code(), Some(2));
    assert_eq!(
        phasenoise(&["leakage", "--hurst", "2", "--gap", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        phasenoise(&["entropy", "--hurst", "1", "--dt", "1", "--alpha", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        phasenoise(&["entropy", "--hurst", "1", "--dt", "1", "--target", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        "simulate",
        "covariance",
        "spectrum",
        "leakage",
        "entropy",
        "avar",
        "calibrate",
        "bandwidth",
    ] {
        let out = phasenoise(&[cmd, "--help"]);
        assert!(out.status.success());
        let text = stdout(&out);
        assert!(text.contains("Usage"), "{cmd}");
        assert!(text.contains("--"), "{cmd}");
    }
    let text = stdout(&phasenoise(&["entropy", "--help"]));
    assert!(text.contains("(s)") && text.contains("[default: 0.5]"));
}
