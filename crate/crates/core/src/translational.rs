//! Centre-of-mass motion of the two interferometer arms along ẑ.
//!
//! In the gradient stages the particle sits in the diamagnetic harmonic trap
//! `Ω² = −χ_ρ η̃²/μ₀` centred on the field zero Z₀, shifted by the spin force
//! `−μ s η̃ cos θ`. In the uniform stage it flies freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldProtocol, Stage};
use crate::model::{ParticleParams, PhysicalConstants};
use crate::ode::{DenseSeries, Dopri5};
use crate::roots::Newton2;

/// NV spin projection along the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+1")]
    Plus,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Minus => -1.0,
            Spin::Zero => 0.0,
            Spin::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    L,
    R,
}

/// Spin history of one arm: `initial` until τ₃, `after_flip` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinBranch {
    pub arm: Arm,
    pub initial: Spin,
    pub after_flip: Spin,
}

impl SpinBranch {
    pub fn new(arm: Arm, initial: Spin, after_flip: Spin) -> Self {
        Self {
            arm,
            initial,
            after_flip,
        }
    }

    #[inline]
    pub fn spin_at(&self, t: f64, tau3: f64) -> Spin {
        if t < tau3 {
            self.initial
        } else {
            self.after_flip
        }
    }
}

/// Which pair of spin states forms the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// s = ±1 arms with a spinning particle.
    GyroscopicPm1,
    /// s ∈ {0, −1} arms with a non-rotating particle.
    #[serde(rename = "static_0m1")]
    Static0m1,
}

impl Scheme {
    /// (L, R) branches. The flip swaps the two spin values of the scheme.
    pub fn branches(self) -> [SpinBranch; 2] {
        match self {
            Scheme::GyroscopicPm1 => [
                SpinBranch::new(Arm::L, Spin::Plus, Spin::Minus),
                SpinBranch::new(Arm::R, Spin::Minus, Spin::Plus),
            ],
            Scheme::Static0m1 => [
                SpinBranch::new(Arm::L, Spin::Minus, Spin::Zero),
                SpinBranch::new(Arm::R, Spin::Zero, Spin::Minus),
            ],
        }
    }

    /// Reference stage times (τ₁, τ₂, τ₃, τ₄) in seconds for the 10⁻¹⁷ kg,
    /// 100 G, 0.45 G/µm configuration.
    pub fn reference_taus(self) -> [f64; 4] {
        match self {
            Scheme::GyroscopicPm1 => [0.482, 0.514, 0.8022, 1.320],
            Scheme::Static0m1 => [0.494, 0.513, 0.800, 1.314],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationalState {
    pub t: f64,
    pub z: f64,
    pub p_z: f64,
}

/// Ω = sqrt(−χ_ρ/μ₀)·|η̃|.
pub fn trap_frequency(constants: &PhysicalConstants, eta_t: f64) -> f64 {
    (-constants.chi_rho / constants.mu0).sqrt() * eta_t.abs()
}

/// Equilibrium separation of the s = ±1 branches, 2μ₀μ/(−χ_ρ m η).
pub fn superposition_size_eq(
    constants: &PhysicalConstants,
    particle: &ParticleParams,
    eta: f64,
) -> Result<f64> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::param("eta", "must be positive"));
    }
    Ok(2.0 * constants.mu0 * constants.mu_nv / (-constants.chi_rho * particle.mass * eta))
}

/// Interval of constant field stage and spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub stage: Stage,
    pub spin: Spin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationalModel {
    pub constants: PhysicalConstants,
    pub particle: ParticleParams,
    pub protocol: FieldProtocol,
}

impl TranslationalModel {
    pub fn new(
        constants: PhysicalConstants,
        particle: ParticleParams,
        protocol: FieldProtocol,
    ) -> Result<Self> {
        constants.validate()?;
        particle.validate()?;
        protocol.validate()?;
        Ok(Self {
            constants,
            particle,
            protocol,
        })
    }

    pub fn with_protocol(&self, protocol: FieldProtocol) -> Self {
        Self { protocol, ..*self }
    }

    /// Ω in the gradient stages.
    pub fn omega(&self) -> f64 {
        trap_frequency(&self.constants, self.protocol.eta)
    }

    /// The four constant-coefficient segments; the last one is open-ended.
    pub fn segments(&self, branch: &SpinBranch) -> [Segment; 4] {
        let p = &self.protocol;
        [
            Segment {
                t0: 0.0,
                t1: p.tau1,
                stage: Stage::Gradient,
                spin: branch.initial,
            },
            Segment {
                t0: p.tau1,
                t1: p.tau2,
                stage: Stage::Uniform,
                spin: branch.initial,
            },
            Segment {
                t0: p.tau2,
                t1: p.tau3,
                stage: Stage::Reversed,
                spin: branch.initial,
            },
            Segment {
                t0: p.tau3,
                t1: f64::INFINITY,
                stage: Stage::Reversed,
                spin: branch.after_flip,
            },
        ]
    }

    /// Acceleration with the spin force scaled by `cos_theta`.
    #[inline]
    pub fn acceleration(&self, stage: Stage, spin: Spin, z: f64, cos_theta: f64) -> f64 {
        let eta_t = self.protocol.eta_at(stage);
        if eta_t == 0.0 {
            return 0.0;
        }
        let om = trap_frequency(&self.constants, eta_t);
        -om * om * (z - self.protocol.z0())
            - self.constants.mu_nv * spin.value() * eta_t * cos_theta / self.particle.mass
    }

    /// Energy of the effective 1D Hamiltonian within one stage (cos θ = 1).
    pub fn energy(&self, stage: Stage, spin: Spin, z: f64, p_z: f64) -> f64 {
        let m = self.particle.mass;
        let eta_t = self.protocol.eta_at(stage);
        let kinetic = p_z * p_z / (2.0 * m);
        if eta_t == 0.0 {
            return kinetic;
        }
        let om = trap_frequency(&self.constants, eta_t);
        let u = z - self.protocol.z0();
        kinetic + 0.5 * m * om * om * u * u + self.constants.mu_nv * spin.value() * eta_t * z
    }

    /// Trap centre in a gradient stage, Z₀ − μ s η̃/(mΩ²).
    pub fn equilibrium(&self, stage: Stage, spin: Spin) -> Option<f64> {
        let eta_t = self.protocol.eta_at(stage);
        if eta_t == 0.0 {
            return None;
        }
        let om = trap_frequency(&self.constants, eta_t);
        Some(
            self.protocol.z0()
                - self.constants.mu_nv * spin.value() * eta_t / (self.particle.mass * om * om),
        )
    }

    fn advance(&self, seg: &Segment, z: f64, v: f64, dt: f64) -> (f64, f64) {
        match self.equilibrium(seg.stage, seg.spin) {
            None => (z + v * dt, v),
            Some(zeq) => {
                let om = self.omega();
                let (s, c) = (om * dt).sin_cos();
                let u = z - zeq;
                (zeq + u * c + v / om * s, -u * om * s + v * c)
            }
        }
    }

    /// Exact piecewise-harmonic solution from rest at z = 0 with cos θ = 1.
    pub fn closed_form(&self, branch: &SpinBranch) -> ClosedFormPath {
        let segments = self.segments(branch);
        let mut starts = [(0.0, 0.0); 4];
        let (mut z, mut v) = (0.0, 0.0);
        for (k, seg) in segments.iter().enumerate() {
            starts[k] = (z, v);
            if k < 3 {
                (z, v) = self.advance(seg, z, v, seg.t1 - seg.t0);
            }
        }
        ClosedFormPath {
            model: *self,
            branch: *branch,
            segments,
            starts,
        }
    }

    /// Adaptive integration of the same motion. With `cos_theta` supplied the
    /// spin force is scaled by cos θ(t).
    pub fn numeric(
        &self,
        branch: &SpinBranch,
        cos_theta: Option<&dyn Fn(f64) -> f64>,
        solver: &Dopri5,
        t_end: f64,
    ) -> Result<NumericPath> {
        let mut series = DenseSeries::new();
        let mut y = [0.0, 0.0];
        let ct = |t: f64| cos_theta.map_or(1.0, |f| f(t));
        for seg in self.segments(branch) {
            if seg.t0 >= t_end {
                break;
            }
            let t1 = seg.t1.min(t_end);
            let (yn, _) = solver.integrate_dense(
                |t, y: &[f64; 2]| Ok([y[1], self.acceleration(seg.stage, seg.spin, y[0], ct(t))]),
                seg.t0,
                y,
                t1,
                &mut series,
            )?;
            y = yn;
        }
        Ok(NumericPath {
            branch: *branch,
            protocol: self.protocol,
            mass: self.particle.mass,
            series,
        })
    }
}

/// Common interface of the closed-form and numerical arm trajectories.
pub trait ArmPath {
    fn branch(&self) -> &SpinBranch;
    fn protocol(&self) -> &FieldProtocol;
    fn state(&self, t: f64) -> TranslationalState;

    /// |B| at the centre of mass.
    fn b_com(&self, t: f64) -> f64 {
        let p = self.protocol();
        p.b_com_in(p.stage(t), self.state(t).z)
    }
}

#[derive(Debug, Clone)]
pub struct ClosedFormPath {
    model: TranslationalModel,
    branch: SpinBranch,
    segments: [Segment; 4],
    starts: [(f64, f64); 4],
}

impl ArmPath for ClosedFormPath {
    fn branch(&self) -> &SpinBranch {
        &self.branch
    }

    fn protocol(&self) -> &FieldProtocol {
        &self.model.protocol
    }

    fn state(&self, t: f64) -> TranslationalState {
        let k = self.segments.iter().rposition(|s| t >= s.t0).unwrap_or(0);
        let seg = &self.segments[k];
        let (z0, v0) = self.starts[k];
        let (z, v) = self.model.advance(seg, z0, v0, t - seg.t0);
        TranslationalState {
            t,
            z,
            p_z: self.model.particle.mass * v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NumericPath {
    branch: SpinBranch,
    protocol: FieldProtocol,
    mass: f64,
    series: DenseSeries<2>,
}

impl NumericPath {
    pub fn series(&self) -> &DenseSeries<2> {
        &self.series
    }
}

impl ArmPath for NumericPath {
    fn branch(&self) -> &SpinBranch {
        &self.branch
    }

    fn protocol(&self) -> &FieldProtocol {
        &self.protocol
    }

    fn state(&self, t: f64) -> TranslationalState {
        let y = self.series.eval(t);
        TranslationalState {
            t,
            z: y[0],
            p_z: self.mass * y[1],
        }
    }
}

/// Largest |z_L − z_R| on a uniform grid of `samples` points over [0, t_end].
pub fn max_separation(l: &dyn ArmPath, r: &dyn ArmPath, t_end: f64, samples: usize) -> f64 {
    (0..=samples)
        .map(|k| {
            let t = t_end * k as f64 / samples as f64;
            (l.state(t).z - r.state(t).z).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureOptions {
    /// m
    pub tol_z: f64,
    /// kg·m/s
    pub tol_p: f64,
    pub newton: Newton2,
}

impl ClosureOptions {
    /// 1 nm and m × 1 nm/s.
    pub fn for_mass(mass: f64) -> Self {
        Self {
            tol_z: 1e-9,
            tol_p: mass * 1e-9,
            newton: Newton2::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Closure {
    pub protocol: FieldProtocol,
    pub residual_z: f64,
    pub residual_p: f64,
    pub iterations: usize,
}

/// Adjusts τ₃ and τ₄ so that both arms meet in position and momentum at τ₄.
/// τ₁ and τ₂ are kept from the template.
pub fn close_interferometer(
    template: &TranslationalModel,
    pair: &[SpinBranch; 2],
    opts: &ClosureOptions,
) -> Result<Closure> {
    let p = template.protocol;
    let mismatch = |x: [f64; 2]| -> Result<[f64; 2]> {
        let proto = p.with_taus([p.tau1, p.tau2, x[0], x[1]])?;
        let m = template.with_protocol(proto);
        let l = m.closed_form(&pair[0]).state(x[1]);
        let r = m.closed_form(&pair[1]).state(x[1]);
        Ok([(l.z - r.z) / opts.tol_z, (l.p_z - r.p_z) / opts.tol_p])
    };
    let out = opts.newton.solve(mismatch, [p.tau3, p.tau4], |r| {
        r[0].abs() <= 1.0 && r[1].abs() <= 1.0
    })?;
    let (residual_z, residual_p) = (out.residual[0] * opts.tol_z, out.residual[1] * opts.tol_p);
    if !out.converged {
        return Err(Error::Closure {
            iterations: out.iterations,
            residual_z: residual_z.abs(),
            residual_p: residual_p.abs(),
        });
    }
    Ok(Closure {
        protocol: p.with_taus([p.tau1, p.tau2, out.x[0], out.x[1]])?,
        residual_z,
        residual_p,
        iterations: out.iterations,
    })
}
