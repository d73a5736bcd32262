use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kentropy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kentropy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_evolve(dt: f64) -> String {
    format!(
        r#"{{
  "profile": {{ "a": 100.0, "rho": 0.2, "c": 1.0, "r_domain": 7.0, "smoothing_width": 0.08 }},
  "grid": {{ "half_extent": 7.0, "n_per_axis": 351 }},
  "quadrature": {{ "n_sigma": 32 }},
  "evolution": {{ "dt": {dt:e}, "n_steps": 2, "scheme": "forward_euler" }}
}}"#
    )
}

#[test]
fn fit_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fit.json", r#"{"samples": [[100, 1e8], [1000, 1e12], [10000, 1e16]]}"#);
    let out = tmp.path().join("out");
    let o = kentropy(&["fit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let p = v["fits"]["power"]["exponent_p"].as_f64().unwrap();
    assert!((p - 4.0).abs() < 1e-9);
}

#[test]
fn diagnose_gaussian_is_silent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.json", r#"{"profile": {"kind": "gaussian"}, "quadrature": {"n_sigma": 64}}"#);
    let out = tmp.path().join("out");
    let o = kentropy(&["diagnose", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(v["report"]["d_direct"].as_f64().unwrap().abs() < 1e-10);
    assert!(out.join("regions.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(kentropy(&["diagnose", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = write(tmp.path(), "bad.json", r#"{"profile": {"kind": "gaussian", "bogus": 1}}"#);
    let o = kentropy(&["diagnose", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line 1"), "{err}");

    let invalid = write(tmp.path(), "inv.json", r#"{"profile": {"kind": "counterexample", "a": -5}}"#);
    assert_eq!(kentropy(&["diagnose", "--config", &invalid]).status.code(), Some(2));

    assert_eq!(kentropy(&["fit"]).status.code(), Some(2));
    assert_eq!(kentropy(&["fit", "--quad-scale", "0"]).status.code(), Some(2));
}

#[test]
fn unstable_step_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.json", &small_evolve(1.0));
    let o = kentropy(&["evolve", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evolve_writes_timeseries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.json", &small_evolve(1e-5));
    let out = tmp.path().join("o");
    let o = kentropy(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,mass,px,py,energy,H,D,dtD,dtD_neg,dtD_pos");
    assert_eq!(lines.count(), 3);
    assert!(out.join("evolve.json").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap();
        let ok = if name.starts_with("diagnose") {
            serde_json::from_str::<kinetic_entropy::experiment::DiagnoseConfig>(&text).is_ok()
        } else if name.starts_with("sweep") {
            serde_json::from_str::<kinetic_entropy::experiment::SweepConfig>(&text).is_ok()
        } else if name.starts_with("evolve") {
            serde_json::from_str::<kinetic_entropy::experiment::EvolveConfig>(&text).is_ok()
        } else {
            serde_json::from_str::<kinetic_entropy::experiment::FitConfig>(&text).is_ok()
        };
        assert!(ok, "{name}");
    }
}
