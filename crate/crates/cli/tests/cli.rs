use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(experiment: &str, config: &str, dir: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{experiment}.ini"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{experiment}-out"));
    let o = Command::new(env!("CARGO_BIN_EXE_nonlocal-rate"))
        .arg(experiment)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (o, out)
}

fn json(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("report.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn rate1d_sine_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(
        "rate1d",
        "[field]\nname = sine\n[sweep]\nh = 0.2, 0.1, 0.05, 0.025\n",
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    let e0: f64 = rows[0][2].parse().unwrap();
    assert!((e0 - PI * PI / 24.0).abs() < 1e-8);
    let j = json(&out);
    assert!(j["summary"]["fitted_order"].as_f64().unwrap() >= 1.0);
    assert!(j["summary"]["oracle"]["rel_diff"].as_f64().unwrap() < 1e-6);
    assert!(fs::read_to_string(out.join("plot.svg")).unwrap().contains("<polyline"));
}

#[test]
fn kernel_report_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run("kernel-report", "[kernel]\nname = ball\ndim = 3\n", dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&out)["summary"]["sigma_d"].as_f64(), Some(0.5));
    assert_eq!(csv_rows(&out).len(), 200);
}

#[test]
fn odd_kernel_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(
        "kernel-report",
        "[kernel]\nname = ball\ndim = 2\nodd_perturbation = 0.2\n",
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not even"));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        "[sweep]\nh = 0.1, 0.2\n",
        "[sweep]\nh = 0.1\n[quadrature]\nbackend = monte_carlo\n",
        "[sweep]\nh = 0.1\n[field]\nname = nonsense\n",
        "[sweep]\nh = 0.1\n[field]\ncenter = 0.5, 0.5\n",
    ] {
        let (o, _) = run("rate1d", cfg, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
    }
}

#[test]
fn h2_probe_hat_grows() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(
        "h2-probe",
        "[field]\nname = hat\ncenter = 0.5, 0.5\nhalf_width = 0.4\n[sweep]\nh = 0.1, 0.05, 0.025\n",
        dir.path(),
        &[],
    );
    assert!(o.status.success());
    assert_eq!(json(&out)["summary"]["growing"], Value::Bool(true));
}

#[test]
fn bounds_audit_zero_and_bump() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run("bounds-audit", "[field]\nname = zero\n[sweep]\nh = 0.1\n", dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    for row in csv_rows(&out) {
        assert_eq!(row[6], "pass", "{row:?}");
        if row[0].starts_with("E_h") {
            let margin: f64 = row[5].parse().unwrap();
            assert!(margin >= 0.0, "{row:?}");
        }
    }
    let (o, out) = run(
        "bounds-audit",
        "[field]\nname = bump\ncenter = 0.5, 0.5\nradius = 0.5\n[sweep]\nh = 0.1\n",
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&out)["summary"]["failed"].as_u64(), Some(0));
}

#[test]
fn violated_audit_exits_1() {
    // a slice grid far too coarse for the slicing identity
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(
        "slice-check",
        "[field]\nname = bump\ncenter = 0.5, 0.5\n[sweep]\nh = 0.2\n[quadrature]\nslice_dx = 0.3\n",
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slicing identity"));
}

#[test]
fn monte_carlo_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[experiment]\nseed = 5\n[field]\nname = bump\ncenter = 0.5, 0.5\n\
               [sweep]\nh = 0.2, 0.1\n[quadrature]\nbackend = monte_carlo\nmc_samples = 512\nnd_gauss_nodes = 8\n";
    let (a, out_a) = run("ratend", cfg, dir.path(), &["--threads", "1"]);
    let bytes_a = fs::read(out_a.join("report.csv")).unwrap();
    let (b, out_b) = run("ratend", cfg, dir.path(), &["--threads", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(bytes_a, fs::read(out_b.join("report.csv")).unwrap());
    let (_, out_c) = run("ratend", cfg, dir.path(), &["--seed", "6"]);
    assert_ne!(bytes_a, fs::read(out_c.join("report.csv")).unwrap());
}
