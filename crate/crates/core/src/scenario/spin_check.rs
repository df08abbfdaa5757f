//! Off-resonance and population-transfer checks of the NV spin for a scenario.

use serde::Serialize;

use crate::error::Result;
use crate::spin::{
    edh_ratio, evolve_spin, off_resonance_margin, OffResonance, SpinAmplitudes,
    SpinHamiltonianParams, SpinStepper,
};
use crate::translational::Spin;

use super::config::ScenarioConfig;

/// Required min(|Δ±|)/W.
pub const DEFAULT_MARGIN_FACTOR: f64 = 1e3;
/// Largest tolerated transfer out of the prepared level.
pub const DEFAULT_RABI_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheck {
    pub b_tesla: f64,
    pub delta_plus_j: f64,
    pub delta_minus_j: f64,
    pub w_j: f64,
    pub margin: OffResonance,
    /// ħω₀/(μB)
    pub edh_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCheck {
    pub initial: i8,
    pub b_tesla: f64,
    pub window_s: f64,
    pub max_transfer: f64,
    /// Σ (W/Δ)² over the levels coupled to the initial one.
    pub perturbative_estimate: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinCheckReport {
    pub omega0_rad_s: f64,
    pub theta0_rad: f64,
    pub fields: Vec<FieldCheck>,
    pub transfers: Vec<TransferCheck>,
    pub margin_factor: f64,
    pub rabi_threshold: f64,
    pub passed: bool,
}

/// Levels directly coupled to `s` and their detunings.
fn perturbative(p: &SpinHamiltonianParams, s: i8) -> f64 {
    let r = |d: f64| (p.w / d).powi(2);
    match s {
        1 => r(p.delta_plus),
        -1 => r(p.delta_minus),
        _ => r(p.delta_plus) + r(p.delta_minus),
    }
}

fn index(s: i8) -> usize {
    (1 - s) as usize
}

/// Margins at B₀ and B₁ and the transfer out of each spin level used by the
/// scheme over `window` seconds at B₀.
pub fn spin_check(
    cfg: &ScenarioConfig,
    window: f64,
    margin_factor: f64,
    rabi_threshold: f64,
) -> Result<SpinCheckReport> {
    let c = &cfg.constants;
    let (w0, th0) = (cfg.rotation.omega0, cfg.rotation.theta0);
    let fields: Vec<FieldCheck> = [cfg.field.b0, cfg.field.b1]
        .iter()
        .map(|&b| {
            let p = SpinHamiltonianParams::new(c, b, th0, w0);
            FieldCheck {
                b_tesla: b,
                delta_plus_j: p.delta_plus,
                delta_minus_j: p.delta_minus,
                w_j: p.w,
                margin: off_resonance_margin(&p, margin_factor),
                edh_ratio: edh_ratio(c.hbar, w0, c.mu_nv, b),
            }
        })
        .collect();

    let mut levels: Vec<i8> = Vec::new();
    for b in cfg.scheme.branches() {
        for s in [b.initial, b.after_flip] {
            let v = match s {
                Spin::Plus => 1,
                Spin::Zero => 0,
                Spin::Minus => -1,
            };
            if !levels.contains(&v) {
                levels.push(v);
            }
        }
    }
    levels.sort_unstable_by(|a, b| b.cmp(a));

    let p = SpinHamiltonianParams::new(c, cfg.field.b0, th0, w0);
    let mut transfers = Vec::new();
    for s in levels {
        let ev = evolve_spin(
            &SpinAmplitudes::basis(s)?,
            &p,
            window,
            &SpinStepper::default(),
            index(s),
        )?;
        transfers.push(TransferCheck {
            initial: s,
            b_tesla: cfg.field.b0,
            window_s: window,
            max_transfer: ev.max_transfer,
            perturbative_estimate: perturbative(&p, s),
            norm_drift: ev.norm_drift,
            steps: ev.steps,
        });
    }
    let passed = fields.iter().all(|f| f.margin.passed)
        && transfers.iter().all(|t| t.max_transfer <= rabi_threshold);
    Ok(SpinCheckReport {
        omega0_rad_s: w0,
        theta0_rad: th0,
        fields,
        transfers,
        margin_factor,
        rabi_threshold,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets::preset;

    #[test]
    fn static_scheme_levels() {
        let cfg = preset("figA1").unwrap();
        let r = spin_check(&cfg, 1e-8, DEFAULT_MARGIN_FACTOR, DEFAULT_RABI_THRESHOLD).unwrap();
        let levels: Vec<i8> = r.transfers.iter().map(|t| t.initial).collect();
        assert_eq!(levels, vec![0, -1]);
        // without tilt the levels are uncoupled
        assert!(r.transfers.iter().all(|t| t.max_transfer < 1e-12));
        assert!(r.passed);
    }
}
