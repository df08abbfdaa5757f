//! Parameter sweeps over one configuration axis.

use std::f64::consts::PI;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::contrast::{contrast_vs_omega0_curve, inverse_scaling, ContrastInputs, CurveRow};
use crate::error::{Error, Result};
use crate::model::ParticleParams;

use super::config::ScenarioConfig;
use super::run::{run_scenario, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Spin rate in Hz.
    Omega0,
    /// Momentum width Δp_ψ in units of ħ.
    Dp,
    /// Thermal occupation of the nutation mode.
    N,
    /// Particle mass in kg.
    Mass,
    /// NV offset d in nm.
    NvOffset,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Omega0 => "omega0_hz",
            SweepAxis::Dp => "dp_hbar",
            SweepAxis::N => "occupation_n",
            SweepAxis::Mass => "mass_kg",
            SweepAxis::NvOffset => "nv_offset_nm",
        }
    }

    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::Omega0 => c.rotation.omega0 = 2.0 * PI * value,
            SweepAxis::Dp => {
                c.quantum.dp_psi = value * c.constants.hbar;
                c.quantum.dp_phi = c.quantum.dp_psi * c.rotation.theta0.cos();
                c.quantum.validate()?;
            }
            SweepAxis::N => {
                c.quantum.occupation_n = value;
                c.quantum.validate()?;
            }
            SweepAxis::Mass => {
                let p = &cfg.particle;
                c.particle = ParticleParams::sphere_with_density(value, p.density)?
                    .with_nv(p.nv_offset, p.nv_angle)?;
            }
            SweepAxis::NvOffset => {
                c.particle = c.particle.with_nv(value * 1e-9, c.particle.nv_angle)?
            }
        }
        c.rotation.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega0" | "omega0_hz" => Ok(SweepAxis::Omega0),
            "dp" | "dp_hbar" => Ok(SweepAxis::Dp),
            "n" | "occupation_n" => Ok(SweepAxis::N),
            "mass" | "mass_kg" => Ok(SweepAxis::Mass),
            "nv_offset" | "nv_offset_nm" | "d" => Ok(SweepAxis::NvOffset),
            _ => Err(Error::Config(vec![format!(
                "unknown sweep axis `{s}`; use omega0, dp, n, mass or nv_offset"
            )])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub tau3_s: Option<f64>,
    pub tau4_s: Option<f64>,
    pub max_separation_m: Option<f64>,
    pub delta_theta: Option<f64>,
    pub delta_phi: Option<f64>,
    pub delta_psi: Option<f64>,
    #[serde(rename = "contrast_zero_T")]
    pub contrast_zero_t: Option<f64>,
    pub contrast_thermal: Option<f64>,
    pub regime_passed: Option<bool>,
    pub regime_lower_margin: Option<f64>,
}

impl SweepRow {
    fn failed(axis: SweepAxis, value: f64, e: Error) -> Self {
        Self {
            axis: axis.name(),
            value,
            ok: false,
            error: Some(e.to_string()),
            tau3_s: None,
            tau4_s: None,
            max_separation_m: None,
            delta_theta: None,
            delta_phi: None,
            delta_psi: None,
            contrast_zero_t: None,
            contrast_thermal: None,
            regime_passed: None,
            regime_lower_margin: None,
        }
    }

    pub fn from_result(axis: SweepAxis, value: f64, r: &RunResult) -> Self {
        let (dt, dphi, dpsi) = match (&r.gyroscopic, &r.static_scheme) {
            (Some(g), _) => (
                Some(g.mismatch.delta_theta),
                Some(g.mismatch.delta_phi),
                Some(g.mismatch.delta_psi),
            ),
            (None, Some(s)) => (Some(s.mismatch.delta_theta), None, None),
            _ => (None, None, None),
        };
        Self {
            axis: axis.name(),
            value,
            ok: true,
            error: None,
            tau3_s: Some(r.protocol.tau3),
            tau4_s: Some(r.protocol.tau4),
            max_separation_m: Some(r.max_separation_m),
            delta_theta: dt,
            delta_phi: dphi,
            delta_psi: dpsi,
            contrast_zero_t: Some(r.contrast_zero_t),
            contrast_thermal: r.contrast_thermal,
            regime_passed: r.gyroscopic.as_ref().map(|g| g.regime.passed),
            regime_lower_margin: r.gyroscopic.as_ref().map(|g| g.regime.lower_margin),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(vec!["sweep grid is empty".into()]));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(vec![
            "sweep grid has non-finite values".into()
        ]));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Config(vec![
            "sweep grid must be strictly monotone".into()
        ]));
    }
    Ok(())
}

fn point(cfg: &ScenarioConfig, axis: SweepAxis, v: f64) -> SweepRow {
    match axis.apply(cfg, v).and_then(|c| run_scenario(&c)) {
        Ok(r) => SweepRow::from_result(axis, v, &r),
        Err(e) => SweepRow::failed(axis, v, e),
    }
}

/// One row per grid point, in grid order. Points run on the rayon pool and
/// failures are recorded in their row.
pub fn run_sweep(cfg: &ScenarioConfig, axis: SweepAxis, grid: &[f64]) -> Result<Vec<SweepRow>> {
    check_grid(grid)?;
    Ok(grid.par_iter().map(|&v| point(cfg, axis, v)).collect())
}

/// Same as [`run_sweep`] on the calling thread.
pub fn run_sweep_serial(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    check_grid(grid)?;
    Ok(grid.iter().map(|&v| point(cfg, axis, v)).collect())
}

/// Contrast-bound curves over ω₀ anchored on one simulated run, with the angle
/// mismatches scaled as 1/ω₀ away from the anchor.
pub fn omega0_curve_from_run(
    cfg: &ScenarioConfig,
    anchor: &RunResult,
    omegas_hz: &[f64],
    dp_hbar: &[f64],
    occupations: &[f64],
) -> Result<Vec<CurveRow>> {
    let g = anchor.gyroscopic.as_ref().ok_or_else(|| {
        Error::Unsupported("the contrast curve needs a gyroscopic_pm1 run".into())
    })?;
    let c = &cfg.constants;
    let base = ContrastInputs::new(
        g.mismatch.delta_phi,
        g.mismatch.delta_psi,
        cfg.quantum.dp_psi,
        c.mu_nv,
        cfg.field.b0,
        cfg.rotation.theta0,
        cfg.particle.inertia,
        cfg.rotation.omega0,
        c.hbar,
    );
    let omegas: Vec<f64> = omegas_hz.iter().map(|f| 2.0 * PI * f).collect();
    Ok(contrast_vs_omega0_curve(
        &base,
        &omegas,
        dp_hbar,
        occupations,
        inverse_scaling(
            cfg.rotation.omega0,
            g.mismatch.delta_phi,
            g.mismatch.delta_psi,
        ),
    ))
}
