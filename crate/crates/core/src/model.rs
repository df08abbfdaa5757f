//! Physical constants, particle and initial-condition records, and the
//! operating-window check for the spin frequency ω₀.
//!
//! Everything is stored in SI units. Frequencies are angular (rad/s).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit conversion factors into SI.
pub mod units {
    /// 1 G in tesla.
    pub const GAUSS: f64 = 1e-4;
    /// 1 G/µm in T/m.
    pub const GAUSS_PER_UM: f64 = 1e2;
    pub const NANOMETER: f64 = 1e-9;
    pub const MICROMETER: f64 = 1e-6;
    pub const DEGREE: f64 = std::f64::consts::PI / 180.0;

    /// Cyclic frequency in Hz to angular frequency in rad/s.
    pub fn hz_to_rad_s(f: f64) -> f64 {
        std::f64::consts::TAU * f
    }

    pub fn rad_s_to_hz(w: f64) -> f64 {
        w / std::f64::consts::TAU
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Planck constant, J·s.
    pub h: f64,
    /// Vacuum permeability, T·m/A.
    pub mu0: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Mass magnetic susceptibility, m³/kg. Negative for a diamagnet.
    pub chi_rho: f64,
    /// NV magnetic moment, J/T.
    pub mu_nv: f64,
    /// NV zero-field splitting, J.
    pub d_zfs: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let h = 6.626_070_15e-34;
        Self {
            hbar: h / (2.0 * PI),
            h,
            mu0: 1.256_637_062_12e-6,
            k_b: 1.380_649e-23,
            chi_rho: -6.2e-9,
            // 2.8 MHz/G = 2.8e10 Hz/T
            mu_nv: h * 2.8e10,
            d_zfs: h * 2.87e9,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hbar", self.hbar),
            ("h", self.h),
            ("mu0", self.mu0),
            ("k_b", self.k_b),
            ("chi_rho", self.chi_rho),
            ("mu_nv", self.mu_nv),
            ("d_zfs", self.d_zfs),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if self.chi_rho >= 0.0 {
            return Err(Error::param("chi_rho", "must be negative (diamagnetic)"));
        }
        if self.mu_nv <= 0.0 {
            return Err(Error::param("mu_nv", "must be positive"));
        }
        if self.d_zfs <= 0.0 {
            return Err(Error::param("d_zfs", "must be positive"));
        }
        if self.hbar <= 0.0 || self.h <= 0.0 || self.mu0 <= 0.0 || self.k_b <= 0.0 {
            return Err(Error::param(
                "hbar",
                "fundamental constants must be positive",
            ));
        }
        Ok(())
    }
}

pub const DIAMOND_DENSITY: f64 = 3500.0;

/// Moment of inertia of a homogeneous sphere of the given mass and density.
pub fn derive_inertia(mass: f64, density: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::param(
            "mass",
            format!("must be positive, got {mass}"),
        ));
    }
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::param(
            "density",
            format!("must be positive, got {density}"),
        ));
    }
    let r = sphere_radius(mass, density);
    Ok(0.4 * mass * r * r)
}

pub fn sphere_radius(mass: f64, density: f64) -> f64 {
    (3.0 * mass / (4.0 * PI * density)).cbrt()
}

/// Nanodiamond sphere with an NV centre displaced by `nv_offset` from the
/// centre of mass at angle `nv_angle` to the body axis n̂₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    pub mass: f64,
    pub density: f64,
    pub inertia: f64,
    pub nv_offset: f64,
    pub nv_angle: f64,
}

impl ParticleParams {
    /// Sphere of diamond density with the NV at the centre of mass.
    pub fn sphere(mass: f64) -> Result<Self> {
        Self::sphere_with_density(mass, DIAMOND_DENSITY)
    }

    pub fn sphere_with_density(mass: f64, density: f64) -> Result<Self> {
        let inertia = derive_inertia(mass, density)?;
        Ok(Self {
            mass,
            density,
            inertia,
            nv_offset: 0.0,
            nv_angle: 0.0,
        })
    }

    pub fn with_inertia(mut self, inertia: f64) -> Result<Self> {
        if !(inertia > 0.0 && inertia.is_finite()) {
            return Err(Error::param(
                "inertia",
                format!("must be positive, got {inertia}"),
            ));
        }
        self.inertia = inertia;
        Ok(self)
    }

    pub fn with_nv(mut self, offset: f64, angle: f64) -> Result<Self> {
        self.nv_offset = offset;
        self.nv_angle = angle;
        self.validate()?;
        Ok(self)
    }

    pub fn radius(&self) -> f64 {
        sphere_radius(self.mass, self.density)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::param("mass", "must be positive"));
        }
        if !(self.inertia > 0.0 && self.inertia.is_finite()) {
            return Err(Error::param("inertia", "must be positive"));
        }
        if !(self.nv_offset >= 0.0 && self.nv_offset.is_finite()) {
            return Err(Error::param("nv_offset", "must be non-negative"));
        }
        if !(0.0..=PI).contains(&self.nv_angle) {
            return Err(Error::param("nv_angle", "must lie in [0, π]"));
        }
        Ok(())
    }
}

/// Initial spin of the particle about n̂₃ and its tilt from ẑ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationInit {
    /// rad/s
    pub omega0: f64,
    /// rad
    pub theta0: f64,
}

impl RotationInit {
    pub const TILT_WARNING: f64 = 0.1;

    pub fn new(omega0: f64, theta0: f64) -> Result<Self> {
        let r = Self { omega0, theta0 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 >= 0.0 && self.omega0.is_finite()) {
            return Err(Error::param("omega0", "must be non-negative"));
        }
        if !(self.theta0 >= 0.0 && self.theta0 < PI) {
            return Err(Error::param("theta0", "must lie in [0, π)"));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.theta0 > Self::TILT_WARNING {
            w.push(format!(
                "theta0 = {} rad exceeds {} rad; small-tilt approximations degrade",
                self.theta0,
                Self::TILT_WARNING
            ));
        }
        w
    }
}

/// Momentum widths of the φ/ψ packets and thermal occupation of the nutation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumInit {
    /// J·s
    pub dp_phi: f64,
    /// J·s
    pub dp_psi: f64,
    pub occupation_n: f64,
}

impl QuantumInit {
    /// Builds the widths with Δp_φ = Δp_ψ cos θ₀.
    pub fn new(dp_psi: f64, theta0: f64, occupation_n: f64) -> Result<Self> {
        let q = Self {
            dp_phi: dp_psi * theta0.cos(),
            dp_psi,
            occupation_n,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_dp_phi(mut self, dp_phi: f64) -> Result<Self> {
        self.dp_phi = dp_phi;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dp_psi > 0.0 && self.dp_psi.is_finite()) {
            return Err(Error::param("dp_psi", "must be positive"));
        }
        if !(self.dp_phi >= 0.0 && self.dp_phi.is_finite()) {
            return Err(Error::param("dp_phi", "must be non-negative"));
        }
        if !(self.occupation_n >= 0.0 && self.occupation_n.is_finite()) {
            return Err(Error::param("occupation_n", "must be non-negative"));
        }
        Ok(())
    }

    /// Temperature implied by the occupation n = k_B T / (ħ ω₀).
    pub fn temperature(&self, omega0: f64, c: &PhysicalConstants) -> f64 {
        self.occupation_n * c.hbar * omega0 / c.k_b
    }
}

/// Outcome of checking ω₀ against its operating window
/// `R·sqrt(μB₀/I) ≤ ω₀ ≤ (μB₀/ħ)/R` and `ω₀ ≤ ((D − μB₀)/ħ)/R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub b0: f64,
    pub omega0: f64,
    pub separation_factor: f64,
    /// sqrt(μB₀/I), rad/s
    pub omega_low: f64,
    /// μB₀/ħ, rad/s
    pub omega_larmor: f64,
    /// (D − μB₀)/ħ, rad/s
    pub omega_zfs_minus: f64,
    /// (D + μB₀)/ħ, rad/s
    pub omega_zfs_plus: f64,
    /// ω₀ / (R ω_low); ≥ 1 passes.
    pub lower_margin: f64,
    /// ω_larmor / (R ω₀); ≥ 1 passes.
    pub larmor_margin: f64,
    /// ω_zfs− / (R ω₀); ≥ 1 passes.
    pub zfs_margin: f64,
    pub lower_ok: bool,
    pub larmor_ok: bool,
    pub zfs_ok: bool,
    pub passed: bool,
    pub warnings: Vec<String>,
}

pub const DEFAULT_SEPARATION: f64 = 10.0;

pub fn validate_regime(
    constants: &PhysicalConstants,
    particle: &ParticleParams,
    rotation: &RotationInit,
    b0: f64,
    separation_factor: f64,
) -> RegimeReport {
    let mu_b = constants.mu_nv * b0;
    let omega_low = (mu_b / particle.inertia).sqrt();
    let omega_larmor = mu_b / constants.hbar;
    let omega_zfs_minus = (constants.d_zfs - mu_b) / constants.hbar;
    let omega_zfs_plus = (constants.d_zfs + mu_b) / constants.hbar;
    let r = separation_factor;
    let w = rotation.omega0;

    let lower_margin = w / (r * omega_low);
    let larmor_margin = if w > 0.0 {
        omega_larmor / (r * w)
    } else {
        f64::INFINITY
    };
    let zfs_margin = if w > 0.0 {
        omega_zfs_minus / (r * w)
    } else {
        f64::INFINITY
    };
    let lower_ok = lower_margin >= 1.0;
    let larmor_ok = larmor_margin >= 1.0;
    let zfs_ok = zfs_margin >= 1.0;

    let mut warnings = rotation.warnings();
    if !lower_ok {
        warnings.push(format!(
            "omega0 = {w:.3e} rad/s is below {r} x sqrt(mu B0 / I) = {:.3e} rad/s",
            r * omega_low
        ));
    }
    if !larmor_ok {
        warnings.push(format!(
            "omega0 = {w:.3e} rad/s is not {r}x below the Larmor frequency {omega_larmor:.3e} rad/s"
        ));
    }
    if !zfs_ok {
        warnings.push(format!(
            "omega0 = {w:.3e} rad/s is not {r}x below (D - mu B0)/hbar = {omega_zfs_minus:.3e} rad/s"
        ));
    }

    RegimeReport {
        b0,
        omega0: w,
        separation_factor: r,
        omega_low,
        omega_larmor,
        omega_zfs_minus,
        omega_zfs_plus,
        lower_margin,
        larmor_margin,
        zfs_margin,
        lower_ok,
        larmor_ok,
        zfs_ok,
        passed: lower_ok && larmor_ok && zfs_ok,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inertia_of_reference_particle() {
        let i = derive_inertia(1e-17, 3500.0).unwrap();
        // independent evaluation: r = (3m / 4πρ)^(1/3)
        let r = (3.0e-17_f64 / (4.0 * PI * 3500.0)).powf(1.0 / 3.0);
        assert_relative_eq!(i, 2.0 / 5.0 * 1e-17 * r * r, max_relative = 1e-14);
        assert!((i - 3.1e-32).abs() < 0.05e-32, "I = {i}");
        assert!((r - 88e-9).abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn mass_for_264nm_sphere() {
        let r = 264e-9;
        let m = 4.0 / 3.0 * PI * r * r * r * 3500.0;
        assert!((m - 2.7e-16).abs() < 0.1e-16, "m = {m}");
        let p = ParticleParams::sphere(m).unwrap();
        assert_relative_eq!(p.radius(), r, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_inertia_inputs() {
        assert!(derive_inertia(0.0, 3500.0).is_err());
        assert!(derive_inertia(1e-17, 0.0).is_err());
        assert!(derive_inertia(-1.0, 3500.0).is_err());
    }

    #[test]
    fn default_constants_are_valid() {
        let c = PhysicalConstants::default();
        c.validate().unwrap();
        let bad = PhysicalConstants { chi_rho: 1e-9, ..c };
        assert!(bad.validate().is_err());
        let bad = PhysicalConstants {
            mu_nv: f64::NAN,
            ..c
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn regime_for_fig3_particle() {
        let c = PhysicalConstants::default();
        let p = ParticleParams::sphere(1e-17).unwrap();
        let rot = RotationInit::new(units::hz_to_rad_s(1e4), 0.01).unwrap();
        let rep = validate_regime(&c, &p, &rot, 100.0 * units::GAUSS, DEFAULT_SEPARATION);
        assert!((rep.omega_low - 2.45e3).abs() < 0.1e3, "{}", rep.omega_low);
        assert!(
            (rep.omega_larmor - 1.76e9).abs() < 0.02e9,
            "{}",
            rep.omega_larmor
        );
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn zero_rotation_fails_lower_bound() {
        let c = PhysicalConstants::default();
        let p = ParticleParams::sphere(1e-17).unwrap();
        let rot = RotationInit::new(0.0, 0.01).unwrap();
        let rep = validate_regime(&c, &p, &rot, 0.01, DEFAULT_SEPARATION);
        assert!(!rep.lower_ok);
        assert!(!rep.passed);
    }

    #[test]
    fn regime_scaling_with_field() {
        let c = PhysicalConstants::default();
        let p = ParticleParams::sphere(1e-17).unwrap();
        let rot = RotationInit::new(6.0e4, 0.01).unwrap();
        let a = validate_regime(&c, &p, &rot, 0.01, 10.0);
        let b = validate_regime(&c, &p, &rot, 0.02, 10.0);
        assert_relative_eq!(b.omega_low / a.omega_low, 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(b.omega_larmor / a.omega_larmor, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn large_tilt_warns() {
        let rot = RotationInit::new(1e4, 0.2).unwrap();
        assert_eq!(rot.warnings().len(), 1);
        assert!(RotationInit::new(-1.0, 0.01).is_err());
    }

    #[test]
    fn quantum_widths() {
        let q = QuantumInit::new(1e-34, 0.01, 0.0).unwrap();
        assert_relative_eq!(q.dp_phi, 1e-34 * 0.01f64.cos());
        assert!(QuantumInit::new(0.0, 0.01, 0.0).is_err());
        assert!(QuantumInit::new(1e-34, 0.01, -1.0).is_err());
        let q = q.with_dp_phi(3e-34).unwrap();
        assert_eq!(q.dp_phi, 3e-34);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inertia_monotone_in_mass(m in 1e-19f64..1e-13, f in 1.0001f64..10.0, rho in 1000.0f64..5000.0) {
                let a = derive_inertia(m, rho).unwrap();
                let b = derive_inertia(m * f, rho).unwrap();
                prop_assert!(b > a);
            }

            #[test]
            fn gauss_round_trip(g in 1e-3f64..1e4) {
                let back = g * units::GAUSS / units::GAUSS;
                prop_assert!((back - g).abs() <= g * f64::EPSILON);
                let back = g * units::GAUSS_PER_UM / units::GAUSS_PER_UM;
                prop_assert!((back - g).abs() <= g * f64::EPSILON);
                let back = g * units::NANOMETER / units::NANOMETER;
                prop_assert!((back - g).abs() <= g * f64::EPSILON);
            }
        }
    }
}
