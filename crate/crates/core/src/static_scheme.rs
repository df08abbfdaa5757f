//! Non-rotating baseline with spin pair {0, −1}.
//!
//! Without spin the particle librates in θ about the NV-offset equilibrium
//! when s = −1 and rotates freely when s = 0. The centre-of-mass force depends
//! on cos θ, so translation and libration are iterated to a fixed point.
//! Quantum widths of the θ packet follow the Gaussian-ansatz equation
//! σ̈ = κ(t)σ + ħ²/(4I²σ³), solved through its linear representation
//! `ü = κ u`, σ = |u| with Wronskian Im(ū u̇) = ħ/2I.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldProtocol, Stage};
use crate::model::{ParticleParams, PhysicalConstants};
use crate::ode::{DenseSeries, Dopri5, Stats};
use crate::rotational::{ArmDrive, Drive};
use crate::translational::{ArmPath, NumericPath, Scheme, Spin, TranslationalModel};

/// Physical parameters of the librating particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Librator {
    pub inertia: f64,
    pub mu: f64,
    pub d: f64,
    pub alpha: f64,
    pub hbar: f64,
}

impl Librator {
    pub fn new(constants: &PhysicalConstants, particle: &ParticleParams) -> Result<Self> {
        particle.validate()?;
        Ok(Self {
            inertia: particle.inertia,
            mu: constants.mu_nv,
            d: particle.nv_offset,
            alpha: particle.nv_angle,
            hbar: constants.hbar,
        })
    }

    /// ω = sqrt(μB/I).
    pub fn libration_frequency(&self, b: f64) -> f64 {
        (self.mu * b / self.inertia).sqrt()
    }

    /// Ground-state width sqrt(ħ/(2Iω)).
    pub fn ground_width(&self, omega: f64) -> f64 {
        (self.hbar / (2.0 * self.inertia * omega)).sqrt()
    }
}

/// θ̈ = (μs/I)[B_nv sin θ + η̃ d sin(θ − α) cos θ], B_nv = B_c + η̃ d cos(θ − α).
#[inline]
pub fn libration_eom(lib: &Librator, drive: &Drive, theta: f64) -> f64 {
    let ed = drive.eta_t * lib.d;
    let (sin, cos) = theta.sin_cos();
    let (s_off, c_off) = (theta - lib.alpha).sin_cos();
    let b_nv = drive.b_c + ed * c_off;
    lib.mu * drive.s / lib.inertia * (b_nv * sin + ed * s_off * cos)
}

/// Small-angle form s ω²(θ − η̃ d sin α / B_c).
#[inline]
pub fn libration_eom_linear(lib: &Librator, drive: &Drive, theta: f64) -> f64 {
    let w2 = lib.mu * drive.b_c / lib.inertia;
    drive.s * w2 * (theta - drive.eta_t * lib.d * lib.alpha.sin() / drive.b_c)
}

/// Closed-form estimates of the final libration mismatch for a flip at phase
/// `gamma_theta`: (δθ, δp_θ).
pub fn static_mismatch_estimates(
    protocol: &FieldProtocol,
    lib: &Librator,
    gamma_theta: f64,
) -> (f64, f64) {
    let amp = protocol.eta * lib.d * lib.alpha.sin() / protocol.b1;
    let w = lib.libration_frequency(protocol.b0);
    let rate = amp * w * gamma_theta.sin();
    (rate * (protocol.tau4 - protocol.tau3), lib.inertia * rate)
}

/// exp[−½(δθ²/λ_θ² + δp_θ²/λ_p²)].
pub fn semiclassical_contrast(
    delta_theta: f64,
    delta_p: f64,
    lambda_theta: f64,
    lambda_p: f64,
) -> f64 {
    (-0.5 * ((delta_theta / lambda_theta).powi(2) + (delta_p / lambda_p).powi(2))).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceLengths {
    /// rad
    pub lambda_theta: f64,
    /// J·s
    pub lambda_p: f64,
}

/// λ_θ = ħ/Δp_θ and λ_p = ħ/Δθ(τ₄) for a coherent state of frequency
/// `omega_flip` that expands freely for `free_time` after the flip.
pub fn coherence_lengths(lib: &Librator, omega_flip: f64, free_time: f64) -> CoherenceLengths {
    let dtheta0 = lib.ground_width(omega_flip);
    let dp = (lib.hbar * lib.inertia * omega_flip / 2.0).sqrt();
    let dtheta_end = lib.hbar * free_time / (2.0 * lib.inertia * dtheta0);
    CoherenceLengths {
        lambda_theta: lib.hbar / dp,
        lambda_p: lib.hbar / dtheta_end,
    }
}

/// Overlap of two Gaussian θ packets with widths σ and width rates σ̇.
pub fn gaussian_contrast(lib: &Librator, sl: f64, sl_dot: f64, sr: f64, sr_dot: f64) -> f64 {
    let a = 1.0 + (sl - sr).powi(2) / (2.0 * sl * sr);
    let b = lib.inertia / lib.hbar * (sl_dot * sr - sr_dot * sl);
    (a * a + b * b).powf(-0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub sigma: f64,
    pub sigma_dot: f64,
    /// Phase curvature Iσ̇/(ħσ).
    pub beta: f64,
}

/// Width history of one arm's θ packet.
#[derive(Debug, Clone)]
pub struct PacketEvolution {
    sigma0: f64,
    inertia: f64,
    hbar: f64,
    /// `[Re x, Im x, Re ẋ, Im ẋ]` with `u = σ₀ x`.
    series: DenseSeries<4>,
    pub stats: Stats,
}

impl PacketEvolution {
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn packet(&self, t: f64) -> GaussianPacket {
        let y = self.series.eval(t);
        let r = y[0].hypot(y[1]);
        let sigma = self.sigma0 * r;
        let sigma_dot = self.sigma0 * (y[0] * y[2] + y[1] * y[3]) / r;
        GaussianPacket {
            sigma,
            sigma_dot,
            beta: self.inertia * sigma_dot / (self.hbar * sigma),
        }
    }

    /// Smallest σ/σ₀ reached at accepted step ends.
    pub fn min_relative_width(&self) -> f64 {
        self.series
            .steps()
            .iter()
            .map(|s| {
                let y = s.y1();
                y[0].hypot(y[1])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evolves the θ packet of one arm from the ground state of the initial trap.
/// `κ(t) = s μ B_c(t)/I`; a free stage has κ = 0.
pub fn packet_width_evolution(
    lib: &Librator,
    drive: &ArmDrive,
    t_end: f64,
    rtol: f64,
) -> Result<PacketEvolution> {
    let b_start = drive.protocol().b_com_in(Stage::Gradient, 0.0);
    let omega_start = lib.libration_frequency(b_start);
    let sigma0 = lib.ground_width(omega_start);
    // ẋ(0) = iħ/(2Iσ₀²) = iω(0)
    let mut y = [1.0, 0.0, 0.0, omega_start];
    let dopri = Dopri5::with_tolerances(rtol, rtol * 1e-3);
    let mut series = DenseSeries::new();
    let mut stats = Stats::default();
    for (t0, t1, stage, spin) in drive.pieces(t_end) {
        let (yn, st) = dopri.integrate_dense(
            |t, y: &[f64; 4]| {
                let d = drive.in_segment(stage, spin, t);
                let kappa = d.s * lib.mu * d.b_c / lib.inertia;
                Ok([y[2], y[3], kappa * y[0], kappa * y[1]])
            },
            t0,
            y,
            t1,
            &mut series,
        )?;
        y = yn;
        stats += st;
    }
    Ok(PacketEvolution {
        sigma0,
        inertia: lib.inertia,
        hbar: lib.hbar,
        series,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastPeak {
    pub t: f64,
    pub contrast: f64,
}

/// Local maxima of the Gaussian contrast in `[t0, t1]`.
///
/// Peaks sit where σ̇_Lσ_R = σ̇_Rσ_L; these zeros are bracketed on a grid of
/// `samples` points, refined by bisection, and kept when the contrast there
/// exceeds `rel_threshold` times the largest one found.
pub fn contrast_peaks(
    lib: &Librator,
    l: &PacketEvolution,
    r: &PacketEvolution,
    t0: f64,
    t1: f64,
    samples: usize,
    rel_threshold: f64,
) -> Vec<ContrastPeak> {
    let f = |t: f64| {
        let a = l.packet(t);
        let b = r.packet(t);
        a.sigma_dot * b.sigma - b.sigma_dot * a.sigma
    };
    let c = |t: f64| {
        let a = l.packet(t);
        let b = r.packet(t);
        gaussian_contrast(lib, a.sigma, a.sigma_dot, b.sigma, b.sigma_dot)
    };
    let n = samples.max(2);
    let mut peaks = Vec::new();
    let mut ta = t0;
    let mut fa = f(ta);
    for k in 1..=n {
        let tb = t0 + (t1 - t0) * k as f64 / n as f64;
        let fb = f(tb);
        if fa == 0.0 || fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (ta, tb, fa);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            peaks.push(ContrastPeak { t, contrast: c(t) });
        }
        ta = tb;
        fa = fb;
    }
    let top = peaks.iter().map(|p| p.contrast).fold(0.0, f64::max);
    peaks.retain(|p| p.contrast >= rel_threshold * top);
    peaks
}

/// Mean spacing of consecutive peak times.
pub fn mean_peak_spacing(peaks: &[ContrastPeak]) -> Option<f64> {
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1].t - peaks[0].t) / (peaks.len() - 1) as f64)
}

/// Settings of the coupled translation/libration solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub max_iterations: usize,
    /// Convergence threshold on max|Δz| between iterations (m).
    pub tol_z: f64,
    pub rtol: f64,
    pub atol: f64,
    pub field_sign_strict: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            tol_z: 1e-12,
            rtol: 1e-10,
            atol: 1e-14,
            field_sign_strict: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StaticArm {
    pub path: NumericPath,
    /// `[θ, θ̇]`
    pub libration: DenseSeries<2>,
}

impl StaticArm {
    pub fn theta(&self, t: f64) -> (f64, f64) {
        let y = self.libration.eval(t);
        (y[0], y[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticMismatch {
    pub delta_theta: f64,
    pub delta_theta_dot: f64,
    pub delta_p_theta: f64,
    /// Position and momentum mismatch of the coupled trajectories at τ₄.
    pub residual_z: f64,
    pub residual_p: f64,
    /// Libration phase of the trapped arm just before the flip.
    pub gamma_theta: f64,
    pub estimate_delta_theta: f64,
    pub estimate_delta_p: f64,
}

#[derive(Debug, Clone)]
pub struct StaticRun {
    pub protocol: FieldProtocol,
    pub arms: [StaticArm; 2],
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
    pub mismatch: StaticMismatch,
}

fn integrate_libration(
    lib: &Librator,
    drive: &ArmDrive,
    t_end: f64,
    opts: &CouplingOptions,
) -> Result<DenseSeries<2>> {
    let dopri = Dopri5::with_tolerances(opts.rtol, opts.atol);
    let mut series = DenseSeries::new();
    let mut y = [0.0, 0.0];
    for (t0, t1, stage, spin) in drive.pieces(t_end) {
        (y, _) = dopri.integrate_dense(
            |t, y: &[f64; 2]| {
                Ok([
                    y[1],
                    libration_eom(lib, &drive.in_segment(stage, spin, t), y[0]),
                ])
            },
            t0,
            y,
            t1,
            &mut series,
        )?;
    }
    Ok(series)
}

/// Coupled solve of both arms over [0, τ₄] for a protocol that is already
/// closed.
pub fn run_static(
    model: &TranslationalModel,
    lib: &Librator,
    scheme: Scheme,
    opts: &CouplingOptions,
) -> Result<StaticRun> {
    let p = model.protocol;
    let t_end = p.tau4;
    let dopri = Dopri5::with_tolerances(opts.rtol, opts.atol * 1e-3);
    let grid: Vec<f64> = (0..=2000).map(|k| t_end * k as f64 / 2000.0).collect();

    let mut arms = Vec::with_capacity(2);
    let mut iterations = 0;
    let mut converged = true;
    let mut last_change = 0.0;
    for branch in scheme.branches() {
        let mut path = model.numeric(&branch, None, &dopri, t_end)?;
        let mut lib_series = integrate_libration(
            lib,
            &ArmDrive::new(&path, opts.field_sign_strict),
            t_end,
            opts,
        )?;
        let mut change = f64::INFINITY;
        let mut it = 0;
        while it < opts.max_iterations && change > opts.tol_z {
            let cos = |t: f64| lib_series.eval(t)[0].cos();
            let next = model.numeric(&branch, Some(&cos), &dopri, t_end)?;
            change = grid
                .iter()
                .map(|&t| (next.state(t).z - path.state(t).z).abs())
                .fold(0.0, f64::max);
            path = next;
            lib_series = integrate_libration(
                lib,
                &ArmDrive::new(&path, opts.field_sign_strict),
                t_end,
                opts,
            )?;
            it += 1;
        }
        iterations = iterations.max(it);
        converged &= change <= opts.tol_z;
        last_change = f64::max(last_change, change);
        arms.push(StaticArm {
            path,
            libration: lib_series,
        });
    }
    let arms: [StaticArm; 2] = arms
        .try_into()
        .map_err(|_| Error::Grid("expected two arms".into()))?;

    let (tl, wl) = arms[0].theta(t_end);
    let (tr, wr) = arms[1].theta(t_end);
    let sl = arms[0].path.state(t_end);
    let sr = arms[1].path.state(t_end);

    // phase of the arm that is trapped before the flip
    let trapped = if scheme.branches()[0].initial != Spin::Zero {
        0
    } else {
        1
    };
    let tf = p.tau3 - 1e-9 * p.tau3;
    let (th, thd) = arms[trapped].theta(tf);
    let drive = ArmDrive::new(&arms[trapped].path, opts.field_sign_strict).at(tf);
    let w = lib.libration_frequency(drive.b_c);
    let offset = drive.eta_t * lib.d * lib.alpha.sin() / drive.b_c;
    let gamma_theta = (-thd / w).atan2(th - offset);
    let (estimate_delta_theta, estimate_delta_p) = static_mismatch_estimates(&p, lib, gamma_theta);

    Ok(StaticRun {
        protocol: p,
        mismatch: StaticMismatch {
            delta_theta: tl - tr,
            delta_theta_dot: wl - wr,
            delta_p_theta: lib.inertia * (wl - wr),
            residual_z: sl.z - sr.z,
            residual_p: sl.p_z - sr.p_z,
            gamma_theta,
            estimate_delta_theta,
            estimate_delta_p,
        },
        arms,
        iterations,
        converged,
        last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn lib(d: f64) -> Librator {
        let c = PhysicalConstants::default();
        let p = ParticleParams::sphere(1e-17)
            .unwrap()
            .with_nv(d, PI / 6.0)
            .unwrap();
        Librator::new(&c, &p).unwrap()
    }

    #[test]
    fn libration_forms() {
        let l = lib(10e-9);
        let free = Drive {
            b_c: 1e-4,
            eta_t: 45.0,
            s: 0.0,
        };
        assert_eq!(libration_eom(&l, &free, 0.3), 0.0);
        let trapped = Drive {
            b_c: 1e-4,
            eta_t: 45.0,
            s: -1.0,
        };
        let offset = 45.0 * 10e-9 * (PI / 6.0).sin() / 1e-4;
        assert_relative_eq!(offset, 2.25e-3, max_relative = 1e-12);
        assert!(libration_eom_linear(&l, &trapped, offset).abs() < 1e-12);
        // small-angle expansion of the full form keeps the 2η̃d cos α stiffening
        let th = 1e-3;
        let ed = 45.0 * 10e-9;
        let expand =
            -l.mu / l.inertia * ((1e-4 + 2.0 * ed * (PI / 6.0).cos()) * th - ed * (PI / 6.0).sin());
        assert_relative_eq!(libration_eom(&l, &trapped, th), expand, max_relative = 1e-5);
        // the approximate form drops that stiffening, a 1.6% effect here
        let slope_full =
            (libration_eom(&l, &trapped, 2e-3) - libration_eom(&l, &trapped, 1e-3)) / 1e-3;
        let slope_lin = (libration_eom_linear(&l, &trapped, 2e-3)
            - libration_eom_linear(&l, &trapped, 1e-3))
            / 1e-3;
        assert_relative_eq!(slope_full, slope_lin, max_relative = 2e-2);
        let l0 = lib(0.0);
        let w2 = l0.mu * 1e-4 / l0.inertia;
        assert_relative_eq!(
            libration_eom(&l0, &trapped, 1e-6),
            -w2 * 1e-6,
            max_relative = 1e-9
        );
    }

    #[test]
    fn mismatch_estimates() {
        let l = lib(10e-9);
        let p = FieldProtocol::new(0.01, 1e-4, 45.0, [0.494, 0.513, 0.8, 1.314]).unwrap();
        assert_eq!(static_mismatch_estimates(&p, &l, 0.0), (0.0, 0.0));
        let (dt, dp) = static_mismatch_estimates(&p, &l, PI / 2.0);
        assert_relative_eq!(dt, dp / l.inertia * 0.514, max_relative = 1e-12);
        let l0 = lib(0.0);
        assert_eq!(static_mismatch_estimates(&p, &l0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn semiclassical_values() {
        assert_eq!(semiclassical_contrast(0.0, 0.0, 0.002, 1.0), 1.0);
        assert!(semiclassical_contrast(0.3, 0.0, 0.002, 1.0) < 1e-300);
        assert_relative_eq!(
            semiclassical_contrast(0.002, 0.0, 0.002, 1.0),
            (-0.5f64).exp()
        );
    }

    #[test]
    fn gaussian_contrast_closed_form() {
        let l = lib(0.0);
        assert_relative_eq!(gaussian_contrast(&l, 0.1, 2.0, 0.1, 2.0), 1.0);
        assert_relative_eq!(
            gaussian_contrast(&l, 0.2, 0.0, 0.1, 0.0),
            1.25f64.powf(-0.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn coherence_length_scale() {
        let l = lib(0.0);
        let w = l.libration_frequency(0.0078);
        let c = coherence_lengths(&l, w, 0.514);
        assert!(
            c.lambda_theta > 0.001 && c.lambda_theta < 0.003,
            "{}",
            c.lambda_theta
        );
        let per_i = c.lambda_p / l.inertia;
        assert!(per_i > 0.002 && per_i < 0.005, "{per_i}");
    }
}
