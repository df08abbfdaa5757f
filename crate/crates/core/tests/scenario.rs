use gyrosgi::scenario::sweep::{run_sweep_serial, SweepAxis};
use gyrosgi::scenario::{emit_outputs, parse_config, preset, run_scenario, run_sweep, RunResult};
use gyrosgi::Error;

fn stable_json(r: &RunResult) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap();
    v["provenance"]["wall_time_s"] = serde_json::Value::Null;
    v
}

#[test]
fn runs_are_deterministic() {
    let cfg = preset("figA2").unwrap();
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(stable_json(&a), stable_json(&b));
    assert_eq!(a.trajectory, b.trajectory);
}

#[test]
fn parallel_sweep_matches_serial() {
    let cfg = preset("figA2").unwrap();
    let grid = [0.0, 2.0, 5.0, 10.0];
    let par = run_sweep(&cfg, SweepAxis::NvOffset, &grid).unwrap();
    let ser = run_sweep_serial(&cfg, SweepAxis::NvOffset, &grid).unwrap();
    assert_eq!(par, ser);
    assert!(par.iter().all(|r| r.ok));
    let c: Vec<f64> = par.iter().map(|r| r.contrast_zero_t.unwrap()).collect();
    assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
}

#[test]
fn failing_sweep_points_are_reported_not_fatal() {
    let cfg = preset("fig3").unwrap();
    let rows = run_sweep(&cfg, SweepAxis::Omega0, &[0.0, 1e4]).unwrap();
    assert!(!rows[0].ok && rows[0].error.is_some());
    assert!(rows[1].ok);
    assert!(run_sweep(&cfg, SweepAxis::Omega0, &[]).is_err());
}

#[test]
fn measured_contrast_respects_bound_without_offset() {
    let cfg = SweepAxis::NvOffset.apply(&preset("fig3").unwrap(), 0.0).unwrap();
    let r = run_scenario(&cfg).unwrap();
    let g = r.gyroscopic.unwrap();
    let measured = g.contrast.contrast_measured.unwrap();
    assert!(measured >= g.contrast.contrast_zero_t, "{measured} < {}", g.contrast.contrast_zero_t);
    assert!(g.full_dynamics && g.linearized_valid);
    // gyroscopic stability: tilt stays within 10 amplitude units
    assert!(g.max_tilt_excursion.iter().all(|&e| e <= 10.0 * g.amplitude_unit_rad));
    assert_eq!(r.contrast_zero_t, g.contrast.contrast_zero_t);
}

#[test]
fn si_document_round_trips() {
    for name in ["fig3", "figA2"] {
        let cfg = preset(name).unwrap();
        let doc = cfg.to_document();
        let again = parse_config(&doc.to_string()).unwrap();
        assert_eq!(again.to_document(), doc);
        assert_eq!(again.source_sha256, parse_config(&doc.to_string()).unwrap().source_sha256);
    }
}

#[test]
fn gyroscopic_scheme_without_rotation_is_a_config_error() {
    let mut doc = preset("fig3").unwrap().to_document();
    doc["rotation"]["omega0_rad_s"] = 0.0.into();
    let err = parse_config(&doc.to_string()).unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("static_0m1"), "{err}");
    assert!(!Error::Regime("x".into()).is_config());
}

#[test]
fn outputs_carry_contrast_keys_for_both_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("figA4").unwrap();
    cfg.outputs.trajectory_csv = Some(dir.path().join("a4.csv"));
    cfg.outputs.report_json = Some(dir.path().join("a4.json"));
    cfg.outputs.stride = 10;
    let r = run_scenario(&cfg).unwrap();
    let written = emit_outputs(&r, &cfg.outputs).unwrap();
    assert_eq!(written.len(), 2);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&written[1]).unwrap()).unwrap();
    assert!(v["contrast_zero_T"].is_number());
    assert!(v["contrast_thermal"].is_null());
    assert!(v["static"]["peaks"].as_array().is_some_and(|p| !p.is_empty()));
    let csv = std::fs::read_to_string(&written[0]).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t_s,z_L_m,z_R_m") && header.ends_with("contrast_gaussian"));
    assert_eq!(csv.lines().count() - 1, r.trajectory.rows.len().div_ceil(10));
}
