//! Euler-angle dynamics of the spinning sphere.
//!
//! The full model evolves Hamilton's equations of
//!
//! ```text
//! H = p_θ²/2I + p_ψ²/2I + (p_φ − p_ψ cos θ)²/(2I sin²θ) + μ s B_nv cos θ
//! ```
//!
//! with `B_nv` the field at the off-centre NV site. The linearized model keeps
//! only the nutation angle θ near its initial tilt θ₀.
//!
//! Internally momenta are divided by I so that every state component has the
//! scale of an angle or an angular velocity; this keeps one absolute tolerance
//! meaningful for all of them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{b_nv, FieldProtocol, Stage};
use crate::model::{ParticleParams, PhysicalConstants, RotationInit};
use crate::ode::{Dopri5, GridSampler, Stats};
use crate::translational::{ArmPath, Spin};

/// Distance from θ = 0 or π at which the Euler chart is considered degenerate.
pub const SINGULARITY_BAND: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationalState {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub p_theta: f64,
    pub p_phi: f64,
    pub p_psi: f64,
}

/// Rigid rotor carrying the NV spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotor {
    pub inertia: f64,
    /// NV magnetic moment μ (J/T).
    pub mu: f64,
    pub d: f64,
    pub alpha: f64,
    pub omega0: f64,
    pub theta0: f64,
}

impl Rotor {
    pub fn new(
        constants: &PhysicalConstants,
        particle: &ParticleParams,
        rotation: &RotationInit,
    ) -> Result<Self> {
        particle.validate()?;
        rotation.validate()?;
        Ok(Self {
            inertia: particle.inertia,
            mu: constants.mu_nv,
            d: particle.nv_offset,
            alpha: particle.nv_angle,
            omega0: rotation.omega0,
            theta0: rotation.theta0,
        })
    }

    /// (θ₀, 0, 0, 0, Iω₀ cos θ₀, Iω₀).
    pub fn initial_state(&self) -> RotationalState {
        let l = self.inertia * self.omega0;
        RotationalState {
            t: 0.0,
            theta: self.theta0,
            phi: 0.0,
            psi: 0.0,
            p_theta: 0.0,
            p_phi: l * self.theta0.cos(),
            p_psi: l,
        }
    }

    /// Nutation amplitude scale μB θ₀/(Iω₀²).
    pub fn amplitude_scale(&self, b: f64) -> f64 {
        self.mu * b * self.theta0 / (self.inertia * self.omega0 * self.omega0)
    }

    fn scaled(&self, s: &RotationalState) -> [f64; 6] {
        let i = self.inertia;
        [
            s.theta,
            s.phi,
            s.psi,
            s.p_theta / i,
            s.p_phi / i,
            s.p_psi / i,
        ]
    }

    fn unscaled(&self, t: f64, y: &[f64; 6]) -> RotationalState {
        let i = self.inertia;
        RotationalState {
            t,
            theta: y[0],
            phi: y[1],
            psi: y[2],
            p_theta: y[3] * i,
            p_phi: y[4] * i,
            p_psi: y[5] * i,
        }
    }
}

/// Field seen by the rotor at one instant. `s` already carries any overall
/// field-sign convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub b_c: f64,
    pub eta_t: f64,
    pub s: f64,
}

/// Field and spin history along one arm.
#[derive(Clone, Copy)]
pub struct ArmDrive<'a> {
    pub path: &'a dyn ArmPath,
    /// Reverse the Zeeman energy in the reversed-gradient stage, following the
    /// literal sign of the stage-3 field instead of the spin bookkeeping.
    pub field_sign_strict: bool,
}

impl<'a> ArmDrive<'a> {
    pub fn new(path: &'a dyn ArmPath, field_sign_strict: bool) -> Self {
        Self {
            path,
            field_sign_strict,
        }
    }

    pub fn protocol(&self) -> &FieldProtocol {
        self.path.protocol()
    }

    /// Effective spin in a given stage with bare spin `spin`.
    pub fn spin_value(&self, stage: Stage, spin: Spin) -> f64 {
        let sign = if self.field_sign_strict && stage == Stage::Reversed {
            -1.0
        } else {
            1.0
        };
        sign * spin.value()
    }

    /// Drive evaluated with a stage and spin fixed by the caller, so that left
    /// limits at boundaries are available.
    pub fn in_segment(&self, stage: Stage, spin: Spin, t: f64) -> Drive {
        let p = self.protocol();
        let z = self.path.state(t).z;
        Drive {
            b_c: p.b_com_in(stage, z),
            eta_t: p.eta_at(stage),
            s: self.spin_value(stage, spin),
        }
    }

    pub fn at(&self, t: f64) -> Drive {
        let p = self.protocol();
        let spin = self.path.branch().spin_at(t, p.tau3);
        self.in_segment(p.stage(t), spin, t)
    }

    /// `(t0, t1, stage, spin)` pieces on which the drive is smooth.
    pub fn pieces(&self, t_end: f64) -> Vec<(f64, f64, Stage, Spin)> {
        let p = *self.protocol();
        let b = self.path.branch();
        let raw = [
            (0.0, p.tau1, Stage::Gradient, b.initial),
            (p.tau1, p.tau2, Stage::Uniform, b.initial),
            (p.tau2, p.tau3, Stage::Reversed, b.initial),
            (p.tau3, f64::INFINITY, Stage::Reversed, b.after_flip),
        ];
        raw.into_iter()
            .filter(|r| r.0 < t_end)
            .map(|(a, e, st, sp)| (a, e.min(t_end), st, sp))
            .collect()
    }
}

#[inline]
fn zeeman(rotor: &Rotor, drive: &Drive, theta: f64, psi: f64) -> f64 {
    rotor.mu
        * drive.s
        * b_nv(drive.b_c, drive.eta_t, theta, psi, rotor.d, rotor.alpha)
        * theta.cos()
}

/// Rotational energy including the Zeeman term.
pub fn hamiltonian(rotor: &Rotor, s: &RotationalState, drive: &Drive) -> f64 {
    let i = rotor.inertia;
    let (sin, cos) = s.theta.sin_cos();
    let q = s.p_phi - s.p_psi * cos;
    s.p_theta * s.p_theta / (2.0 * i)
        + s.p_psi * s.p_psi / (2.0 * i)
        + q * q / (2.0 * i * sin * sin)
        + zeeman(rotor, drive, s.theta, s.psi)
}

fn check_chart(t: f64, theta: f64) -> Result<()> {
    if !(SINGULARITY_BAND..=PI - SINGULARITY_BAND).contains(&theta) {
        return Err(Error::Integration {
            t,
            reason: format!("nutation angle {theta:.3e} entered the Euler-angle singularity band"),
        });
    }
    Ok(())
}

/// Time derivative of the scaled state `[θ, φ, ψ, p_θ/I, p_φ/I, p_ψ/I]`.
#[inline]
fn scaled_rhs(rotor: &Rotor, drive: &Drive, t: f64, y: &[f64; 6]) -> Result<[f64; 6]> {
    let [theta, _, psi, w_theta, w_phi, w_psi] = *y;
    check_chart(t, theta)?;
    let (sin, cos) = theta.sin_cos();
    let (sin_psi, cos_psi) = psi.sin_cos();
    let (sa, ca) = rotor.alpha.sin_cos();
    let q = w_phi - w_psi * cos;
    let sin2 = sin * sin;
    let phi_dot = q / sin2;
    let ed = drive.eta_t * rotor.d;
    let k = rotor.mu * drive.s / rotor.inertia;
    // −∂H/∂θ and −∂H/∂ψ, divided by I
    let gyro = -(q * w_psi / sin - q * q * cos / (sin2 * sin));
    let dv_dtheta =
        -drive.b_c * sin + ed * (-2.0 * ca * cos * sin + sa * cos_psi * (2.0 * theta).cos());
    let w_psi_dot = k * ed * sa * sin * cos * sin_psi;
    Ok([
        w_theta,
        phi_dot,
        w_psi - cos * phi_dot,
        gyro - k * dv_dtheta,
        0.0,
        w_psi_dot,
    ])
}

/// Hamilton's equations in physical units, ordered (θ, φ, ψ, p_θ, p_φ, p_ψ).
pub fn hamilton_rhs(rotor: &Rotor, s: &RotationalState, drive: &Drive) -> Result<[f64; 6]> {
    let y = rotor.scaled(s);
    let d = scaled_rhs(rotor, drive, s.t, &y)?;
    let i = rotor.inertia;
    Ok([d[0], d[1], d[2], d[3] * i, d[4] * i, d[5] * i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSolver {
    pub rtol: f64,
    pub atol: f64,
    /// Minimum number of steps per spin period 2π/ω₀.
    pub steps_per_period: f64,
}

impl Default for RotationSolver {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            steps_per_period: 50.0,
        }
    }
}

impl RotationSolver {
    pub fn dopri(&self, omega: f64) -> Dopri5 {
        let cap = if omega > 0.0 {
            2.0 * PI / omega / self.steps_per_period
        } else {
            f64::INFINITY
        };
        Dopri5::with_tolerances(self.rtol, self.atol).h_max(cap)
    }
}

#[derive(Debug, Clone)]
pub struct FullRun {
    /// States at the requested grid times.
    pub samples: Vec<RotationalState>,
    pub final_state: RotationalState,
    /// Largest |θ − θ₀| over accepted step endpoints.
    pub max_tilt_excursion: f64,
    pub stats: Stats,
}

/// Integrates the full Euler-angle dynamics from the rotor's initial state.
pub fn integrate_full(
    rotor: &Rotor,
    drive: &ArmDrive,
    t_end: f64,
    solver: &RotationSolver,
    grid: &[f64],
) -> Result<FullRun> {
    if rotor.theta0 < SINGULARITY_BAND {
        return Err(Error::Unsupported(format!(
            "full Euler-angle integration needs theta0 >= {SINGULARITY_BAND} rad; use the linearized solver"
        )));
    }
    let dopri = solver.dopri(rotor.omega0);
    let init = rotor.initial_state();
    let mut y = rotor.scaled(&init);
    let mut sampler = GridSampler::new(grid);
    sampler.push_initial(0.0, y);
    let mut stats = Stats::default();
    let mut max_dev: f64 = 0.0;
    for (t0, t1, stage, spin) in drive.pieces(t_end) {
        let (yn, st) = dopri.integrate(
            |t, y: &[f64; 6]| scaled_rhs(rotor, &drive.in_segment(stage, spin, t), t, y),
            t0,
            y,
            t1,
            |step| {
                max_dev = max_dev.max((step.y1()[0] - rotor.theta0).abs());
                sampler.observe(step);
            },
        )?;
        y = yn;
        stats += st;
    }
    sampler.push_initial(t_end, y);
    Ok(FullRun {
        samples: sampler
            .samples
            .iter()
            .map(|(t, y)| rotor.unscaled(*t, y))
            .collect(),
        final_state: rotor.unscaled(t_end, &y),
        max_tilt_excursion: max_dev,
        stats,
    })
}

/// Linearized nutation state. φ and ψ are deviations accumulated from
/// φ̇ = (ω₀/θ₀)(θ − θ₀) and ψ̇ = −φ̇; the uniform ψ advance ω₀t is omitted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearSample {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub phi: f64,
    pub psi: f64,
}

#[derive(Debug, Clone)]
pub struct LinearRun {
    pub samples: Vec<LinearSample>,
    pub final_state: LinearSample,
    pub max_tilt_excursion: f64,
    /// max|θ − θ₀| stayed below a tenth of θ₀.
    pub valid: bool,
    pub stats: Stats,
}

/// θ̈ = −(ω₀² − μsB_c/I)(θ − θ₀) + (μs/I)B_c θ₀.
#[inline]
pub fn linear_theta_accel(rotor: &Rotor, drive: &Drive, theta: f64) -> f64 {
    let k = rotor.mu * drive.s * drive.b_c / rotor.inertia;
    -(rotor.omega0 * rotor.omega0 - k) * (theta - rotor.theta0) + k * rotor.theta0
}

pub fn integrate_linearized(
    rotor: &Rotor,
    drive: &ArmDrive,
    t_end: f64,
    solver: &RotationSolver,
    grid: &[f64],
) -> Result<LinearRun> {
    if rotor.theta0.is_nan() || rotor.theta0 <= 0.0 {
        return Err(Error::param(
            "theta0",
            "linearized φ/ψ accumulation divides by θ₀ > 0",
        ));
    }
    let dopri = solver.dopri(rotor.omega0);
    let rate = rotor.omega0 / rotor.theta0;
    let mut y = [rotor.theta0, 0.0, 0.0];
    let mut sampler = GridSampler::new(grid);
    sampler.push_initial(0.0, y);
    let mut stats = Stats::default();
    let mut max_dev: f64 = 0.0;
    for (t0, t1, stage, spin) in drive.pieces(t_end) {
        let (yn, st) = dopri.integrate(
            |t, y: &[f64; 3]| {
                let d = drive.in_segment(stage, spin, t);
                Ok([
                    y[1],
                    linear_theta_accel(rotor, &d, y[0]),
                    rate * (y[0] - rotor.theta0),
                ])
            },
            t0,
            y,
            t1,
            |step| {
                max_dev = max_dev.max((step.y1()[0] - rotor.theta0).abs());
                sampler.observe(step);
            },
        )?;
        y = yn;
        stats += st;
    }
    sampler.push_initial(t_end, y);
    let mk = |t: f64, y: &[f64; 3]| LinearSample {
        t,
        theta: y[0],
        theta_dot: y[1],
        phi: y[2],
        psi: -y[2],
    };
    Ok(LinearRun {
        samples: sampler.samples.iter().map(|(t, y)| mk(*t, y)).collect(),
        final_state: mk(t_end, &y),
        max_tilt_excursion: max_dev,
        valid: max_dev <= 0.1 * rotor.theta0,
        stats,
    })
}

/// Adiabatic equilibrium θ̄ = θ₀ + μsB_cθ₀/(Iω₀² − μsB_c).
pub fn theta_bar(rotor: &Rotor, b_c: f64, s: f64) -> Result<f64> {
    let msb = rotor.mu * s * b_c;
    let den = rotor.inertia * rotor.omega0 * rotor.omega0 - msb;
    if den <= 0.0 {
        return Err(Error::Regime(format!(
            "I omega0^2 = {:.3e} J does not exceed mu s B_c = {msb:.3e} J",
            rotor.inertia * rotor.omega0 * rotor.omega0
        )));
    }
    Ok(rotor.theta0 + msb * rotor.theta0 / den)
}

/// θ₀ + μsB_cθ₀/(Iω₀²), valid for Iω₀² ≫ μB_c.
pub fn theta_bar_approx(rotor: &Rotor, b_c: f64, s: f64) -> f64 {
    rotor.theta0 + rotor.mu * s * b_c * rotor.theta0 / (rotor.inertia * rotor.omega0 * rotor.omega0)
}

/// Upper bound 8μB₀θ₀/(Iω₀²) on the final nutation mismatch.
pub fn delta_theta_bound(rotor: &Rotor, b0: f64) -> f64 {
    8.0 * rotor.amplitude_scale(b0)
}

/// Trapezoid accumulation of φ̇ = (ω₀/θ₀)(θ − θ₀) and ψ̇ = −φ̇ along a sampled
/// θ series.
pub fn accumulate_phi_psi(
    t: &[f64],
    theta: &[f64],
    omega0: f64,
    theta0: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.len() != theta.len() {
        return Err(Error::Grid(format!(
            "{} times but {} angles",
            t.len(),
            theta.len()
        )));
    }
    let rate = omega0 / theta0;
    let mut phi = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for k in 0..t.len() {
        if k > 0 {
            acc += 0.5 * (t[k] - t[k - 1]) * rate * (theta[k] + theta[k - 1] - 2.0 * theta0);
        }
        phi.push(acc);
    }
    let psi = phi.iter().map(|p| -p).collect();
    Ok((phi, psi))
}

/// θ̄ of both arms on a shared grid that repeats each boundary time so that
/// left and right limits are both present.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ThetaBarGrid {
    pub t: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

pub fn theta_bar_grid(
    rotor: &Rotor,
    l: &ArmDrive,
    r: &ArmDrive,
    t_end: f64,
    points_per_piece: usize,
) -> Result<ThetaBarGrid> {
    let n = points_per_piece.max(2);
    let pl = l.pieces(t_end);
    let pr = r.pieces(t_end);
    if pl.len() != pr.len() {
        return Err(Error::Grid("arms have different stage boundaries".into()));
    }
    let mut g = ThetaBarGrid::default();
    for (a, b) in pl.iter().zip(&pr) {
        for k in 0..n {
            let t = a.0 + (a.1 - a.0) * k as f64 / (n - 1) as f64;
            let dl = l.in_segment(a.2, a.3, t);
            let dr = r.in_segment(b.2, b.3, t);
            g.t.push(t);
            g.left.push(theta_bar(rotor, dl.b_c, dl.s)?);
            g.right.push(theta_bar(rotor, dr.b_c, dr.s)?);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub delta_phi: f64,
    /// Area where θ̄_L > θ̄_R (rad·s).
    pub sigma_a: f64,
    /// Area where θ̄_L < θ̄_R, as a positive number.
    pub sigma_b: f64,
}

/// δφ(τ₄) ≈ (ω₀/θ₀)(Σ_A − Σ_B) with Σ the signed areas of θ̄_L − θ̄_R.
pub fn delta_phi_area(
    t: &[f64],
    bar_l: &[f64],
    bar_r: &[f64],
    omega0: f64,
    theta0: f64,
) -> Result<AreaReport> {
    if t.len() != bar_l.len() || t.len() != bar_r.len() {
        return Err(Error::Grid(format!(
            "grid has {} times, {} left and {} right values",
            t.len(),
            bar_l.len(),
            bar_r.len()
        )));
    }
    if t.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Grid("time grid must be non-decreasing".into()));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for k in 1..t.len() {
        let h = t[k] - t[k - 1];
        let f0 = bar_l[k - 1] - bar_r[k - 1];
        let f1 = bar_l[k] - bar_r[k];
        if f0 * f1 >= 0.0 {
            let area = 0.5 * h * (f0 + f1);
            if area >= 0.0 {
                a += area;
            } else {
                b -= area;
            }
        } else {
            // split the trapezoid at the zero crossing
            let x = h * f0 / (f0 - f1);
            let (p, n) = (0.5 * x * f0, 0.5 * (h - x) * f1);
            if f0 > 0.0 {
                a += p;
                b -= n;
            } else {
                b -= p;
                a += n;
            }
        }
    }
    Ok(AreaReport {
        delta_phi: omega0 / theta0 * (a - b),
        sigma_a: a,
        sigma_b: b,
    })
}

/// Final-time mismatches between the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub delta_theta: f64,
    pub delta_p_theta: f64,
    /// From the full Euler-angle integration.
    pub delta_phi: f64,
    pub delta_psi: f64,
    pub delta_theta_bound: f64,
    /// Σ_A − Σ_B of the θ̄ area route (rad·s).
    pub sigma_a_minus_sigma_b: f64,
    /// δφ from the θ̄ area formula.
    pub delta_phi_area: f64,
    /// δφ accumulated along the linearized θ trajectories.
    pub delta_phi_linear: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translational::{Scheme, TranslationalModel};
    use approx::assert_relative_eq;

    fn rotor(d: f64) -> Rotor {
        let c = PhysicalConstants::default();
        let p = ParticleParams::sphere(1e-17)
            .unwrap()
            .with_nv(d, PI / 6.0)
            .unwrap();
        let r = RotationInit::new(2.0 * PI * 1e4, 0.01).unwrap();
        Rotor::new(&c, &p, &r).unwrap()
    }

    #[test]
    fn theta_bar_values() {
        let r = rotor(0.0);
        let tb = theta_bar(&r, 0.01, 1.0).unwrap();
        assert!((tb - 0.01 - 1.5e-5).abs() < 0.1e-5, "{}", tb - 0.01);
        assert_eq!(theta_bar(&r, 0.01, 0.0).unwrap(), 0.01);
        assert_eq!(theta_bar(&r, 0.0, 1.0).unwrap(), 0.01);
        assert_relative_eq!(theta_bar_approx(&r, 0.01, 1.0), tb, max_relative = 1e-5);
        let slow = Rotor { omega0: 10.0, ..r };
        assert!(matches!(theta_bar(&slow, 0.01, 1.0), Err(Error::Regime(_))));
    }

    #[test]
    fn mismatch_bound() {
        let r = rotor(0.0);
        let b = delta_theta_bound(&r, 0.01);
        assert!((b - 1.2e-4).abs() < 0.05e-4, "{b}");
        let fast = Rotor {
            omega0: 2.0 * r.omega0,
            ..r
        };
        assert_relative_eq!(
            delta_theta_bound(&fast, 0.01),
            b / 4.0,
            max_relative = 1e-12
        );
        assert_eq!(delta_theta_bound(&Rotor { theta0: 0.0, ..r }, 0.01), 0.0);
    }

    #[test]
    fn conserved_momenta_without_offset() {
        let r = rotor(0.0);
        let s = RotationalState {
            theta: 0.3,
            psi: 1.1,
            p_theta: 1e-33,
            ..r.initial_state()
        };
        let d = hamilton_rhs(
            &r,
            &s,
            &Drive {
                b_c: 0.01,
                eta_t: 45.0,
                s: 1.0,
            },
        )
        .unwrap();
        assert_eq!(d[4], 0.0);
        assert_eq!(d[5], 0.0);
    }

    #[test]
    fn singularity_band_rejected() {
        let r = rotor(0.0);
        let s = RotationalState {
            theta: 1e-4,
            ..r.initial_state()
        };
        assert!(hamilton_rhs(
            &r,
            &s,
            &Drive {
                b_c: 0.01,
                eta_t: 0.0,
                s: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn phi_psi_accumulation() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let (phi, psi) = accumulate_phi_psi(&t, &[0.01; 11], 100.0, 0.01).unwrap();
        assert!(phi.iter().chain(&psi).all(|v| *v == 0.0));
        let th: Vec<f64> = t.iter().map(|x| 0.01 + 1e-4 * x).collect();
        let (phi, psi) = accumulate_phi_psi(&t, &th, 100.0, 0.01).unwrap();
        assert_relative_eq!(phi[10], 100.0 / 0.01 * 1e-4 * 0.5, max_relative = 1e-12);
        assert!(phi.iter().zip(&psi).all(|(a, b)| a + b == 0.0));
        assert!(accumulate_phi_psi(&t, &th[..5], 1.0, 0.01).is_err());
    }

    #[test]
    fn area_formula() {
        let t = [0.0, 1.0, 2.0];
        let z = delta_phi_area(&t, &[0.1; 3], &[0.1; 3], 10.0, 0.01).unwrap();
        assert_eq!(z.delta_phi, 0.0);
        // crossing from +1 to −1: equal areas
        let a = delta_phi_area(&t, &[1.0, 0.0, -1.0], &[0.0; 3], 1.0, 1.0).unwrap();
        assert_relative_eq!(a.sigma_a, 0.5);
        assert_relative_eq!(a.sigma_b, 0.5);
        assert_eq!(a.delta_phi, 0.0);
        let c = delta_phi_area(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0], 1.0, 1.0).unwrap();
        assert_relative_eq!(c.sigma_a, 0.25);
        assert_relative_eq!(c.sigma_b, 0.25);
        assert!(delta_phi_area(&t, &[0.0; 2], &[0.0; 3], 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_field_linear_matches_harmonic() {
        // constant B_c: use a protocol whose first stage outlasts the window
        let r = rotor(0.0);
        let proto = FieldProtocol::new(0.01, 1e-4, 45.0, [1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = TranslationalModel::new(
            PhysicalConstants::default(),
            ParticleParams::sphere(1e-17).unwrap(),
            proto,
        )
        .unwrap();
        let br = crate::translational::SpinBranch::new(
            crate::translational::Arm::L,
            Spin::Plus,
            Spin::Plus,
        );
        struct Fixed<'a>(crate::translational::ClosedFormPath, &'a FieldProtocol);
        impl ArmPath for Fixed<'_> {
            fn branch(&self) -> &crate::translational::SpinBranch {
                self.0.branch()
            }
            fn protocol(&self) -> &FieldProtocol {
                self.1
            }
            fn state(&self, t: f64) -> crate::translational::TranslationalState {
                crate::translational::TranslationalState {
                    t,
                    z: 0.0,
                    p_z: 0.0,
                }
            }
        }
        let path = Fixed(m.closed_form(&br), &proto);
        let drive = ArmDrive::new(&path, false);
        let tight = RotationSolver {
            rtol: 1e-12,
            atol: 1e-15,
            ..RotationSolver::default()
        };
        let t_end = 2e-3;
        let run = integrate_linearized(&r, &drive, t_end, &tight, &[]).unwrap();
        let k = r.mu * 0.01 / r.inertia;
        let w = (r.omega0 * r.omega0 - k).sqrt();
        let bar = theta_bar(&r, 0.01, 1.0).unwrap();
        let exact = bar + (r.theta0 - bar) * (w * t_end).cos();
        assert!((run.final_state.theta - exact).abs() < 1e-9 * exact);
        assert!(run.valid);
    }

    #[test]
    fn fig3_rotational_consistency() {
        let scheme = Scheme::GyroscopicPm1;
        let proto = FieldProtocol::new(0.01, 1e-4, 45.0, scheme.reference_taus()).unwrap();
        let c = PhysicalConstants::default();
        let m = TranslationalModel::new(c, ParticleParams::sphere(1e-17).unwrap(), proto).unwrap();
        let r = rotor(0.0);
        let [bl, _] = scheme.branches();
        let path = m.closed_form(&bl);
        let drive = ArmDrive::new(&path, false);
        // a short window keeps the unit test fast
        let t_end = 0.02;
        let grid: Vec<f64> = (0..=400).map(|k| t_end * k as f64 / 400.0).collect();
        let full = integrate_full(&r, &drive, t_end, &RotationSolver::default(), &grid).unwrap();
        let lin =
            integrate_linearized(&r, &drive, t_end, &RotationSolver::default(), &grid).unwrap();
        assert_eq!(full.samples.len(), grid.len());
        let max_diff = full
            .samples
            .iter()
            .zip(&lin.samples)
            .map(|(a, b)| (a.theta - b.theta).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-2 * r.theta0, "{max_diff}");
        let a = r.amplitude_scale(0.01);
        assert!(full.max_tilt_excursion <= 10.0 * a);
        assert!(full.max_tilt_excursion >= 0.5 * a);
        assert_eq!(full.final_state.p_phi, r.initial_state().p_phi);
    }
}
