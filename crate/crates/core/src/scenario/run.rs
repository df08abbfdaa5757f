//! End-to-end pipeline: closure, translation, rotation, mismatch, contrast.

use std::time::Instant;

use serde::Serialize;

use crate::contrast::{
    delta_x, measured_contrast, phase_space_distance, temperature_from_occupation,
    thermal_contrast_bound, ContrastInputs, ContrastReport,
};
use crate::error::{Error, Result};
use crate::field::FieldProtocol;
use crate::model::{validate_regime, RegimeReport, DEFAULT_SEPARATION};
use crate::ode::Stats;
use crate::rotational::{
    delta_phi_area, delta_theta_bound, integrate_full, integrate_linearized, theta_bar,
    theta_bar_grid, ArmDrive, MismatchReport, RotationSolver, Rotor, SINGULARITY_BAND,
};
use crate::static_scheme::{
    coherence_lengths, contrast_peaks, gaussian_contrast, mean_peak_spacing,
    packet_width_evolution, run_static, semiclassical_contrast, CoherenceLengths, ContrastPeak,
    CouplingOptions, Librator, StaticMismatch,
};
use crate::translational::{
    close_interferometer, max_separation, ArmPath, ClosureOptions, Scheme, Spin, TranslationalModel,
};

use super::config::ScenarioConfig;

pub const GYRO_COLUMNS: [&str; 13] = [
    "t_s",
    "z_L_m",
    "z_R_m",
    "pz_L",
    "pz_R",
    "theta_L_rad",
    "theta_R_rad",
    "theta_bar_L_rad",
    "theta_bar_R_rad",
    "phi_L_rad",
    "phi_R_rad",
    "psi_L_rad",
    "psi_R_rad",
];

pub const STATIC_COLUMNS: [&str; 12] = [
    "t_s",
    "z_L_m",
    "z_R_m",
    "pz_L",
    "pz_R",
    "theta_L_rad",
    "theta_R_rad",
    "theta_dot_L_rad_s",
    "theta_dot_R_rad_s",
    "sigma_L_rad",
    "sigma_R_rad",
    "contrast_gaussian",
];

/// Trajectory column set of a scheme.
pub fn columns(scheme: Scheme) -> &'static [&'static str] {
    match scheme {
        Scheme::GyroscopicPm1 => &GYRO_COLUMNS,
        Scheme::Static0m1 => &STATIC_COLUMNS,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureSummary {
    /// Whether τ₃, τ₄ were solved or taken from the configuration.
    pub solved: bool,
    pub iterations: usize,
    /// Closed-form arms at τ₄, m.
    pub residual_z_m: f64,
    /// m/s
    pub residual_v_m_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GyroSummary {
    pub mismatch: MismatchReport,
    pub contrast: ContrastReport,
    pub regime: RegimeReport,
    /// Largest |θ − θ₀| per arm, rad.
    pub max_tilt_excursion: [f64; 2],
    /// μB₀θ₀/(Iω₀²), rad.
    pub amplitude_unit_rad: f64,
    pub linearized_valid: bool,
    /// Whether the angle mismatches come from the full Euler-angle solve.
    pub full_dynamics: bool,
    pub delta_x: f64,
    /// nħω₀/k_B
    pub temperature_from_n_k: f64,
    pub steps: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticSummary {
    pub mismatch: StaticMismatch,
    pub coupling_iterations: usize,
    pub coupling_converged: bool,
    pub coherence: CoherenceLengths,
    pub semiclassical_contrast: f64,
    /// Libration frequency of the trapped arm at τ₄, rad/s.
    pub libration_frequency_tau4: f64,
    /// Libration frequency at the middle of the peak window, rad/s.
    pub libration_frequency_window: f64,
    pub peak_window_s: [f64; 2],
    pub peaks: Vec<ContrastPeak>,
    pub mean_peak_spacing_s: Option<f64>,
    /// 2π / spacing, rad/s.
    pub peak_recurrence_rad_s: Option<f64>,
    /// Smallest σ/σ₀ of each arm.
    pub min_relative_width: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub crate_version: &'static str,
    pub solver: RotationSolver,
    pub samples: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub name: Option<String>,
    pub scheme: Scheme,
    pub protocol: FieldProtocol,
    pub closure: ClosureSummary,
    pub max_separation_m: f64,
    #[serde(rename = "contrast_zero_T")]
    pub contrast_zero_t: f64,
    /// No thermal form exists for the static scheme.
    pub contrast_thermal: Option<f64>,
    pub gyroscopic: Option<GyroSummary>,
    #[serde(rename = "static")]
    pub static_scheme: Option<StaticSummary>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Runs the configured scheme from field protocol to contrast.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    let start = Instant::now();
    if cfg.scheme == Scheme::GyroscopicPm1 && cfg.rotation.omega0 == 0.0 {
        return Err(Error::Unsupported(
            "omega0 = 0 has no gyroscopic stabilization; run the static_0m1 scheme instead".into(),
        ));
    }
    let f = cfg.field;
    let template = FieldProtocol::new(f.b0, f.b1, f.eta, cfg.protocol.taus)
        .and_then(|p| TranslationalModel::new(cfg.constants, cfg.particle, p))
        .map_err(|e| e.at_stage("setup"))?;
    let branches = cfg.scheme.branches();

    let (model, solved, iterations) = if cfg.protocol.close {
        let c = close_interferometer(
            &template,
            &branches,
            &ClosureOptions::for_mass(cfg.particle.mass),
        )
        .map_err(|e| e.at_stage("closure"))?;
        (template.with_protocol(c.protocol), true, c.iterations)
    } else {
        (template, false, 0)
    };
    let protocol = model.protocol;
    let t_end = protocol.tau4;
    let (end_l, end_r) = (
        model.closed_form(&branches[0]).state(t_end),
        model.closed_form(&branches[1]).state(t_end),
    );
    let closure = ClosureSummary {
        solved,
        iterations,
        residual_z_m: end_l.z - end_r.z,
        residual_v_m_s: (end_l.p_z - end_r.p_z) / cfg.particle.mass,
    };

    let mut warnings = cfg.warnings.clone();
    let grid = linspace(t_end, cfg.integrator.samples);
    let mut result = RunResult {
        name: cfg.name.clone(),
        scheme: cfg.scheme,
        protocol,
        closure,
        max_separation_m: 0.0,
        contrast_zero_t: 0.0,
        contrast_thermal: None,
        gyroscopic: None,
        static_scheme: None,
        warnings: Vec::new(),
        provenance: Provenance {
            config_sha256: cfg.source_sha256.clone(),
            crate_version: env!("CARGO_PKG_VERSION"),
            solver: cfg.integrator.solver,
            samples: cfg.integrator.samples,
            wall_time_s: 0.0,
        },
        trajectory: Trajectory::default(),
    };
    match cfg.scheme {
        Scheme::GyroscopicPm1 => {
            let (summary, traj, sep) = run_gyroscopic(cfg, &model, &grid, &mut warnings)?;
            result.contrast_zero_t = summary.contrast.contrast_zero_t;
            result.contrast_thermal = Some(summary.contrast.contrast_thermal);
            result.gyroscopic = Some(summary);
            result.trajectory = traj;
            result.max_separation_m = sep;
        }
        Scheme::Static0m1 => {
            let (summary, traj, sep) = run_static_scheme(cfg, &model, &grid, &mut warnings)?;
            result.contrast_zero_t = summary.semiclassical_contrast;
            result.static_scheme = Some(summary);
            result.trajectory = traj;
            result.max_separation_m = sep;
        }
    }
    result.warnings = warnings;
    result.provenance.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}

const SEPARATION_SAMPLES: usize = 20_000;

/// Packet widths below this fraction of σ₀ signal a breakdown of the ansatz.
const MIN_RELATIVE_WIDTH: f64 = 1e-3;

fn run_gyroscopic(
    cfg: &ScenarioConfig,
    model: &TranslationalModel,
    grid: &[f64],
    warnings: &mut Vec<String>,
) -> Result<(GyroSummary, Trajectory, f64)> {
    let t_end = model.protocol.tau4;
    let [bl, br] = cfg.scheme.branches();
    let (pl, pr) = (model.closed_form(&bl), model.closed_form(&br));
    let sep = max_separation(&pl, &pr, t_end, SEPARATION_SAMPLES);
    let strict = cfg.integrator.field_sign_strict;
    let (dl, dr) = (ArmDrive::new(&pl, strict), ArmDrive::new(&pr, strict));
    let rotor = Rotor::new(&cfg.constants, &cfg.particle, &cfg.rotation)
        .map_err(|e| e.at_stage("rotor"))?;
    let regime = validate_regime(
        &cfg.constants,
        &cfg.particle,
        &cfg.rotation,
        cfg.field.b0,
        DEFAULT_SEPARATION,
    );
    let solver = cfg.integrator.solver;

    let lin = [
        integrate_linearized(&rotor, &dl, t_end, &solver, grid)
            .map_err(|e| e.at_stage("linearized rotation (L)"))?,
        integrate_linearized(&rotor, &dr, t_end, &solver, grid)
            .map_err(|e| e.at_stage("linearized rotation (R)"))?,
    ];
    let full = if rotor.theta0 >= SINGULARITY_BAND {
        Some([
            integrate_full(&rotor, &dl, t_end, &solver, grid)
                .map_err(|e| e.at_stage("full rotation (L)"))?,
            integrate_full(&rotor, &dr, t_end, &solver, grid)
                .map_err(|e| e.at_stage("full rotation (R)"))?,
        ])
    } else {
        warnings.push(format!(
            "theta0 below {SINGULARITY_BAND} rad: angle mismatches come from the linearized solver"
        ));
        None
    };
    let linearized_valid = lin.iter().all(|r| r.valid);
    if !linearized_valid {
        warnings.push(
            "nutation excursion exceeds 0.1 theta0; the linearized solution is outside its range"
                .into(),
        );
    }

    let bars = theta_bar_grid(&rotor, &dl, &dr, t_end, cfg.integrator.theta_bar_points)
        .map_err(|e| e.at_stage("theta_bar"))?;
    let area = delta_phi_area(&bars.t, &bars.left, &bars.right, rotor.omega0, rotor.theta0)
        .map_err(|e| e.at_stage("area"))?;
    let delta_phi_linear = lin[0].final_state.phi - lin[1].final_state.phi;

    let (delta_theta, delta_theta_dot, delta_phi, delta_psi, ends, excursion, mut steps) =
        match &full {
            Some([l, r]) => {
                let (a, b) = (l.final_state, r.final_state);
                let mut st = l.stats;
                st += r.stats;
                (
                    a.theta - b.theta,
                    (a.p_theta - b.p_theta) / rotor.inertia,
                    a.phi - b.phi,
                    a.psi - b.psi,
                    [
                        (a.theta, a.p_theta / rotor.inertia),
                        (b.theta, b.p_theta / rotor.inertia),
                    ],
                    [l.max_tilt_excursion, r.max_tilt_excursion],
                    st,
                )
            }
            None => {
                let (a, b) = (lin[0].final_state, lin[1].final_state);
                (
                    a.theta - b.theta,
                    a.theta_dot - b.theta_dot,
                    a.phi - b.phi,
                    a.psi - b.psi,
                    [(a.theta, a.theta_dot), (b.theta, b.theta_dot)],
                    [lin[0].max_tilt_excursion, lin[1].max_tilt_excursion],
                    Stats::default(),
                )
            }
        };
    steps += lin[0].stats;
    steps += lin[1].stats;

    let mismatch = MismatchReport {
        delta_theta,
        delta_p_theta: rotor.inertia * delta_theta_dot,
        delta_phi,
        delta_psi,
        delta_theta_bound: delta_theta_bound(&rotor, cfg.field.b0),
        sigma_a_minus_sigma_b: area.sigma_a - area.sigma_b,
        delta_phi_area: area.delta_phi,
        delta_phi_linear,
    };

    let c = &cfg.constants;
    let inputs = ContrastInputs::new(
        delta_phi,
        delta_psi,
        cfg.quantum.dp_psi,
        c.mu_nv,
        cfg.field.b0,
        rotor.theta0,
        rotor.inertia,
        rotor.omega0,
        c.hbar,
    )
    .with_dp_phi(cfg.quantum.dp_phi);
    let mut contrast = thermal_contrast_bound(&inputs, cfg.quantum.occupation_n);
    let distance = phase_space_distance(ends[0], ends[1], rotor.inertia, rotor.omega0, c.hbar);
    contrast.contrast_measured = Some(measured_contrast(
        &inputs,
        distance,
        cfg.quantum.occupation_n,
    ));
    let b_end = 0.5 * (pl.b_com(t_end) + pr.b_com(t_end));

    let rows = trajectory_rows_gyro(&rotor, &dl, &dr, grid, &full, &lin)?;
    let summary = GyroSummary {
        mismatch,
        contrast,
        regime,
        max_tilt_excursion: excursion,
        amplitude_unit_rad: rotor.amplitude_scale(cfg.field.b0),
        linearized_valid,
        full_dynamics: full.is_some(),
        delta_x: delta_x(
            b_end,
            rotor.theta0,
            rotor.inertia,
            c.mu_nv,
            rotor.omega0,
            c.hbar,
        ),
        temperature_from_n_k: temperature_from_occupation(
            cfg.quantum.occupation_n,
            c.hbar,
            rotor.omega0,
            c.k_b,
        ),
        steps,
    };
    Ok((
        summary,
        Trajectory {
            columns: GYRO_COLUMNS.to_vec(),
            rows,
        },
        sep,
    ))
}

fn trajectory_rows_gyro(
    rotor: &Rotor,
    dl: &ArmDrive,
    dr: &ArmDrive,
    grid: &[f64],
    full: &Option<[crate::rotational::FullRun; 2]>,
    lin: &[crate::rotational::LinearRun; 2],
) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &t) in grid.iter().enumerate() {
        let (zl, zr) = (dl.path.state(t), dr.path.state(t));
        let (al, ar) = (dl.at(t), dr.at(t));
        let angles = |side: usize| match full {
            Some(f) => {
                let s = f[side].samples[k];
                (s.theta, s.phi, s.psi)
            }
            None => {
                let s = lin[side].samples[k];
                (s.theta, s.phi, s.psi)
            }
        };
        let (tl, phl, psl) = angles(0);
        let (tr, phr, psr) = angles(1);
        rows.push(vec![
            t,
            zl.z,
            zr.z,
            zl.p_z,
            zr.p_z,
            tl,
            tr,
            theta_bar(rotor, al.b_c, al.s)?,
            theta_bar(rotor, ar.b_c, ar.s)?,
            phl,
            phr,
            psl,
            psr,
        ]);
    }
    Ok(rows)
}

fn run_static_scheme(
    cfg: &ScenarioConfig,
    model: &TranslationalModel,
    grid: &[f64],
    warnings: &mut Vec<String>,
) -> Result<(StaticSummary, Trajectory, f64)> {
    let p = model.protocol;
    let t_end = p.tau4;
    let lib = Librator::new(&cfg.constants, &cfg.particle).map_err(|e| e.at_stage("librator"))?;
    let opts = CouplingOptions {
        max_iterations: cfg.integrator.coupling_iterations,
        field_sign_strict: cfg.integrator.field_sign_strict,
        ..CouplingOptions::default()
    };
    let run =
        run_static(model, &lib, cfg.scheme, &opts).map_err(|e| e.at_stage("coupled libration"))?;
    if !run.converged {
        warnings.push(format!(
            "translation/libration coupling stopped after {} iterations with max change {:.3e} m",
            run.iterations, run.last_change
        ));
    }
    let sep = max_separation(
        &run.arms[0].path,
        &run.arms[1].path,
        t_end,
        SEPARATION_SAMPLES,
    );

    let branches = cfg.scheme.branches();
    let before = branches
        .iter()
        .position(|b| b.initial != Spin::Zero)
        .unwrap_or(0);
    let after = branches
        .iter()
        .position(|b| b.after_flip != Spin::Zero)
        .unwrap_or(1);
    let strict = cfg.integrator.field_sign_strict;
    let drive_before = ArmDrive::new(&run.arms[before].path, strict);
    let drive_after = ArmDrive::new(&run.arms[after].path, strict);
    let omega_flip = lib.libration_frequency(drive_before.at(p.tau3 * (1.0 - 1e-9)).b_c);
    let coherence = coherence_lengths(&lib, omega_flip, t_end - p.tau3);
    let m = run.mismatch;
    let semiclassical = semiclassical_contrast(
        m.delta_theta,
        m.delta_p_theta,
        coherence.lambda_theta,
        coherence.lambda_p,
    );

    let packets = [
        packet_width_evolution(
            &lib,
            &ArmDrive::new(&run.arms[0].path, strict),
            t_end,
            1e-10,
        )
        .map_err(|e| e.at_stage("packet width (L)"))?,
        packet_width_evolution(
            &lib,
            &ArmDrive::new(&run.arms[1].path, strict),
            t_end,
            1e-10,
        )
        .map_err(|e| e.at_stage("packet width (R)"))?,
    ];
    for (side, pk) in ["L", "R"].iter().zip(&packets) {
        if pk.min_relative_width() < MIN_RELATIVE_WIDTH {
            warnings.push(format!(
                "packet width of arm {side} fell to {:.3e} of its initial value",
                pk.min_relative_width()
            ));
        }
    }
    let s = cfg.static_scheme;
    let w0 = (t_end - s.peak_window).max(0.0);
    let peaks = contrast_peaks(
        &lib,
        &packets[0],
        &packets[1],
        w0,
        t_end,
        s.peak_samples,
        s.peak_threshold,
    );
    let spacing = mean_peak_spacing(&peaks);

    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let (zl, zr) = (run.arms[0].path.state(t), run.arms[1].path.state(t));
        let (tl, wl) = run.arms[0].theta(t);
        let (tr, wr) = run.arms[1].theta(t);
        let (gl, gr) = (packets[0].packet(t), packets[1].packet(t));
        rows.push(vec![
            t,
            zl.z,
            zr.z,
            zl.p_z,
            zr.p_z,
            tl,
            tr,
            wl,
            wr,
            gl.sigma,
            gr.sigma,
            gaussian_contrast(&lib, gl.sigma, gl.sigma_dot, gr.sigma, gr.sigma_dot),
        ]);
    }

    let summary = StaticSummary {
        mismatch: m,
        coupling_iterations: run.iterations,
        coupling_converged: run.converged,
        coherence,
        semiclassical_contrast: semiclassical,
        libration_frequency_tau4: lib.libration_frequency(drive_after.at(t_end).b_c),
        libration_frequency_window: lib.libration_frequency(drive_after.at(0.5 * (w0 + t_end)).b_c),
        peak_window_s: [w0, t_end],
        peaks,
        mean_peak_spacing_s: spacing,
        peak_recurrence_rad_s: spacing.map(|d| 2.0 * std::f64::consts::PI / d),
        min_relative_width: [
            packets[0].min_relative_width(),
            packets[1].min_relative_width(),
        ],
    };
    Ok((
        summary,
        Trajectory {
            columns: STATIC_COLUMNS.to_vec(),
            rows,
        },
        sep,
    ))
}
