use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hyperstokes(args: &[&str], dir: &Path, config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hyperstokes"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("HYPERSTOKES_C")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

const SMALL: &str = "N_r = 64\nN_th = 64\n";

#[test]
fn stokes_run_writes_fields_and_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(&["solve-stokes", "--reproducible"], d.path(), SMALL);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "u.csv",
        "w.csv",
        "w_tilde.csv",
        "dF.csv",
        "pressure.csv",
        "h.csv",
        "grad_u.csv",
    ] {
        assert!(d.path().join("out").join(f).exists(), "{f}");
    }
    let r = report(d.path());
    assert_eq!(r["schema"], 1);
    assert_eq!(r["passed"], true);
    assert!(r.get("timing_seconds").is_none());
    assert!(r["scalars"]["pairing"]["value"].as_f64().unwrap() < 0.0);
}

#[test]
fn unknown_key_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(&["solve-stokes"], d.path(), "N_r = 64\nfrobnicate = 3\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));
}

#[test]
fn short_outer_radius_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(&["solve-stokes"], d.path(), "R_max = 3\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4R0"));
}

#[test]
fn large_data_needs_override() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(&["solve-ns"], d.path(), SMALL);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("smallness condition"));
}

#[test]
fn small_data_ns_run_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(
        &["solve-ns", "--reproducible"],
        d.path(),
        "N_r = 64\nN_th = 64\ndf_fraction = 0.05\nconstant_samples = 10\n",
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(d.path());
    assert!(r["picard"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["converged"] == true));
    assert!(r["constants"]["C_aR0"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn empty_sweep_and_bad_parameter_are_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(&["sweep", "--param", "grid"], d.path(), SMALL);
    assert_eq!(out.status.code(), Some(2));
    let out = hyperstokes(
        &["sweep", "--param", "viscosity", "--values", "1"],
        d.path(),
        SMALL,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_sweep_row_exits_one() {
    let d = tempfile::tempdir().unwrap();
    let out = hyperstokes(
        &["sweep", "--param", "R_max", "--values", "12,3"],
        d.path(),
        SMALL,
    );
    assert_eq!(out.status.code(), Some(1));
    let r = report(d.path());
    assert_eq!(r["passed"], false);
    assert!(r["sweep"]["rows"][1]["error"]
        .as_str()
        .unwrap()
        .contains("4R0"));
}
