use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gyrosgi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyrosgi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn preset_to(dir: &Path, name: &str) -> String {
    let out = gyrosgi(&["reproduce", name, "--print-config"]);
    assert!(out.status.success());
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, &out.stdout).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_accepts_presets() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig3", "fig4", "figA1", "figA2", "figA4"] {
        let cfg = preset_to(dir.path(), name);
        let out = gyrosgi(&["validate", &cfg]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(doc.get("scheme").is_some());
    }
}

#[test]
fn config_errors_exit_2_and_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"scheme":"gyroscopic_pm1","field":{"b0":0.01},"extra":true}"#,
    )
    .unwrap();
    let out = gyrosgi(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("extra"), "{err}");
    assert!(err.contains("b0"), "{err}");
    assert!(err.contains("particle"), "{err}");

    let missing = gyrosgi(&["validate", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let usage = gyrosgi(&["simulate"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn close_prints_stage_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_to(dir.path(), "fig3");
    let out = gyrosgi(&["close", &cfg]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tau3 = v["tau3_s"].as_f64().unwrap();
    let tau4 = v["tau4_s"].as_f64().unwrap();
    assert!((tau3 - 0.8004).abs() < 1e-3, "{tau3}");
    assert!((tau4 - 1.3144).abs() < 1e-3, "{tau4}");
    assert!(v["residual_z_m"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn simulate_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_to(dir.path(), "fig3");
    let csv = dir.path().join("run/traj.csv");
    let report = dir.path().join("run/report.json");
    let out = gyrosgi(&[
        "simulate",
        &cfg,
        "--csv",
        csv.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--stride",
        "100",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t_s");
    assert!(header.contains(&"phi_L_rad") && header.contains(&"psi_R_rad"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 5 && rows.len() < 100, "{}", rows.len());
    assert!(rows.iter().all(|r| r.split(',').count() == header.len()));

    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in [
        "contrast_zero_T",
        "contrast_thermal",
        "max_separation_m",
        "provenance",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let c = v["contrast_zero_T"].as_f64().unwrap();
    assert!(c > 0.0 && c <= 1.0);
    assert_eq!(v["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_writes_one_row_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_to(dir.path(), "fig3");
    let csv = dir.path().join("sweep.csv");
    let out = gyrosgi(&[
        "sweep",
        &cfg,
        "--axis",
        "n",
        "--grid",
        "0,10",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);

    let bad = gyrosgi(&["sweep", &cfg, "--axis", "n", "--grid", "1,3,3"]);
    assert_eq!(bad.status.code(), Some(2));
}
