//! Contrast bounds for the rotating scheme.
//!
//! The nutation of each arm is a coherent state of amplitude
//! `α = k[(θ − θ̄) + iθ̇/ω₀]` with `k = sqrt(Iω₀/2ħ)`. The precession and spin
//! angles carry Gaussian momentum distributions whose widths turn angle
//! mismatches into a loss of visibility.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase-space scale k = sqrt(Iω₀/2ħ) in 1/rad.
pub fn phase_space_scale(inertia: f64, omega0: f64, hbar: f64) -> f64 {
    (inertia * omega0 / (2.0 * hbar)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude {
    pub alpha: Complex64,
    pub equilibrium_theta_bar: f64,
}

impl CoherentAmplitude {
    pub fn from_state(
        theta: f64,
        theta_dot: f64,
        theta_bar: f64,
        inertia: f64,
        omega0: f64,
        hbar: f64,
    ) -> Self {
        let k = phase_space_scale(inertia, omega0, hbar);
        Self {
            alpha: Complex64::new(k * (theta - theta_bar), k * theta_dot / omega0),
            equilibrium_theta_bar: theta_bar,
        }
    }
}

/// exp[−½|α_L − (α_R + δX)|²]
pub fn coherent_overlap(alpha_l: Complex64, alpha_r: Complex64, delta_x: f64) -> f64 {
    (-0.5 * (alpha_l - alpha_r - delta_x).norm_sqr()).exp()
}

/// Shift between the two arms' equilibria in phase-space units,
/// k·2μB_cθ₀/(Iω₀²).
pub fn delta_x(b_c: f64, theta0: f64, inertia: f64, mu: f64, omega0: f64, hbar: f64) -> f64 {
    phase_space_scale(inertia, omega0, hbar) * 2.0 * mu * b_c * theta0 / (inertia * omega0 * omega0)
}

/// Complex phase-space distance between two nutation states.
pub fn phase_space_distance(
    (theta_l, theta_dot_l): (f64, f64),
    (theta_r, theta_dot_r): (f64, f64),
    inertia: f64,
    omega0: f64,
    hbar: f64,
) -> Complex64 {
    let k = phase_space_scale(inertia, omega0, hbar);
    Complex64::new(
        k * (theta_l - theta_r),
        k * (theta_dot_l - theta_dot_r) / omega0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastInputs {
    pub delta_phi: f64,
    pub delta_psi: f64,
    /// J·s
    pub dp_phi: f64,
    /// J·s
    pub dp_psi: f64,
    pub mu: f64,
    pub b0: f64,
    pub theta0: f64,
    pub inertia: f64,
    pub omega0: f64,
    pub hbar: f64,
}

impl ContrastInputs {
    /// Builds the inputs with Δp_φ = Δp_ψ cos θ₀.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        delta_phi: f64,
        delta_psi: f64,
        dp_psi: f64,
        mu: f64,
        b0: f64,
        theta0: f64,
        inertia: f64,
        omega0: f64,
        hbar: f64,
    ) -> Self {
        Self {
            delta_phi,
            delta_psi,
            dp_phi: dp_psi * theta0.cos(),
            dp_psi,
            mu,
            b0,
            theta0,
            inertia,
            omega0,
            hbar,
        }
    }

    pub fn with_dp_phi(self, dp_phi: f64) -> Self {
        Self { dp_phi, ..self }
    }

    /// Same particle at another spin rate with the angle mismatches given.
    pub fn at_omega0(self, omega0: f64, delta_phi: f64, delta_psi: f64) -> Self {
        Self {
            omega0,
            delta_phi,
            delta_psi,
            ..self
        }
    }

    /// Nutation amplitude unit A = k·μB₀θ₀/(Iω₀²).
    pub fn amplitude_unit(&self) -> f64 {
        phase_space_scale(self.inertia, self.omega0, self.hbar) * self.mu * self.b0 * self.theta0
            / (self.inertia * self.omega0 * self.omega0)
    }

    /// 16μ²B₀²θ₀²/(ħIω₀³), equal to ½(8A)².
    pub fn third_term(&self) -> f64 {
        let mb = self.mu * self.b0 * self.theta0;
        16.0 * mb * mb / (self.hbar * self.inertia * self.omega0.powi(3))
    }

    fn momentum_exponent(&self) -> f64 {
        let a = self.delta_phi * self.dp_phi / self.hbar;
        let b = self.delta_psi * self.dp_psi / self.hbar;
        0.5 * (a * a + b * b)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inertia", self.inertia),
            ("omega0", self.omega0),
            ("hbar", self.hbar),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("delta_phi", self.delta_phi),
            ("delta_psi", self.delta_psi),
            ("dp_phi", self.dp_phi),
            ("dp_psi", self.dp_psi),
            ("mu", self.mu),
            ("b0", self.b0),
            ("theta0", self.theta0),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.dp_phi < 0.0 || self.dp_psi < 0.0 {
            return Err(Error::param("dp", "momentum widths must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub delta_phi: f64,
    pub delta_psi: f64,
    pub dp_phi: f64,
    pub dp_psi: f64,
    pub third_term_exponent: f64,
    #[serde(rename = "contrast_zero_T")]
    pub contrast_zero_t: f64,
    pub contrast_thermal: f64,
    pub occupation_n: f64,
    /// Momentum integrals by quadrature times the worst-case coherent overlap.
    pub contrast_full_integral: f64,
    /// Amplitude unit A used for the worst-case overlap.
    pub amplitude_unit: f64,
    /// Contrast from the integrated final amplitudes, when available.
    pub contrast_measured: Option<f64>,
}

/// Zero-temperature lower bound.
pub fn gyro_contrast_bound(inputs: &ContrastInputs) -> ContrastReport {
    thermal_contrast_bound(inputs, 0.0)
}

/// Lower bound with the nutation term scaled by (1 + 2n).
pub fn thermal_contrast_bound(inputs: &ContrastInputs, n: f64) -> ContrastReport {
    let n = n.max(0.0);
    let m = inputs.momentum_exponent();
    let third = inputs.third_term();
    let a = inputs.amplitude_unit();
    let full = gaussian_phase_integral(
        inputs.delta_phi,
        inputs.dp_phi,
        inputs.hbar,
        QUADRATURE_NODES,
    ) * gaussian_phase_integral(
        inputs.delta_psi,
        inputs.dp_psi,
        inputs.hbar,
        QUADRATURE_NODES,
    ) * coherent_overlap(
        Complex64::new(3.0 * a, 0.0),
        Complex64::new(-3.0 * a, 0.0),
        -2.0 * a,
    );
    ContrastReport {
        delta_phi: inputs.delta_phi,
        delta_psi: inputs.delta_psi,
        dp_phi: inputs.dp_phi,
        dp_psi: inputs.dp_psi,
        third_term_exponent: third,
        contrast_zero_t: (-m - third).exp(),
        contrast_thermal: (-m - (1.0 + 2.0 * n) * third).exp(),
        occupation_n: n,
        contrast_full_integral: full,
        amplitude_unit: a,
        contrast_measured: None,
    }
}

/// Contrast from an actual phase-space distance between the arms.
pub fn measured_contrast(inputs: &ContrastInputs, distance: Complex64, n: f64) -> f64 {
    (-inputs.momentum_exponent() - 0.5 * (1.0 + 2.0 * n.max(0.0)) * distance.norm_sqr()).exp()
}

pub const QUADRATURE_NODES: usize = 4001;

/// |∫ g(p) e^{ipδ/ħ} dp| for a normalized Gaussian g of standard deviation
/// `dp`, by the trapezoid rule over ±12 widths.
pub fn gaussian_phase_integral(delta: f64, dp: f64, hbar: f64, nodes: usize) -> f64 {
    if dp == 0.0 {
        return 1.0;
    }
    let half = 12.0 * dp;
    let h = 2.0 * half / (nodes - 1) as f64;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * dp);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes {
        let p = -half + k as f64 * h;
        let w = if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
        acc += w
            * norm
            * (-0.5 * (p / dp).powi(2)).exp()
            * Complex64::from_polar(1.0, p * delta / hbar);
    }
    (acc * h).norm()
}

/// Temperature equivalent of an occupation number, nħω₀/k_B.
pub fn temperature_from_occupation(n: f64, hbar: f64, omega0: f64, k_b: f64) -> f64 {
    n * hbar * omega0 / k_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub omega0_rad_s: f64,
    pub omega0_hz: f64,
    pub dp_hbar: f64,
    pub n: f64,
    pub delta_phi: f64,
    pub delta_psi: f64,
    pub third_term: f64,
    pub contrast: f64,
}

/// Family of bound curves over ω₀ (rad/s). `mismatch(ω₀)` supplies (δφ, δψ);
/// widths are given in units of ħ and set Δp_ψ with Δp_φ = Δp_ψ cos θ₀.
pub fn contrast_vs_omega0_curve<F>(
    base: &ContrastInputs,
    omegas: &[f64],
    dp_hbar: &[f64],
    occupations: &[f64],
    mismatch: F,
) -> Vec<CurveRow>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut rows = Vec::with_capacity(omegas.len() * dp_hbar.len() * occupations.len());
    for &dp in dp_hbar {
        for &n in occupations {
            for &w in omegas {
                let (dphi, dpsi) = mismatch(w);
                let inp = ContrastInputs {
                    dp_psi: dp * base.hbar,
                    dp_phi: dp * base.hbar * base.theta0.cos(),
                    ..base.at_omega0(w, dphi, dpsi)
                };
                let r = thermal_contrast_bound(&inp, n);
                rows.push(CurveRow {
                    omega0_rad_s: w,
                    omega0_hz: w / (2.0 * std::f64::consts::PI),
                    dp_hbar: dp,
                    n,
                    delta_phi: dphi,
                    delta_psi: dpsi,
                    third_term: r.third_term_exponent,
                    contrast: r.contrast_thermal,
                });
            }
        }
    }
    rows
}

/// Mismatches scaled as 1/ω₀ from a single simulated anchor.
pub fn inverse_scaling(
    anchor_omega0: f64,
    delta_phi: f64,
    delta_psi: f64,
) -> impl Fn(f64) -> (f64, f64) {
    move |w| (delta_phi * anchor_omega0 / w, delta_psi * anchor_omega0 / w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhysicalConstants;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fig3(dp_hbar: f64, delta_phi: f64) -> ContrastInputs {
        let c = PhysicalConstants::default();
        ContrastInputs::new(
            delta_phi,
            -delta_phi,
            dp_hbar * c.hbar,
            c.mu_nv,
            0.01,
            0.01,
            3.0995e-32,
            2.0 * PI * 1e4,
            c.hbar,
        )
    }

    #[test]
    fn overlap_values() {
        let a = Complex64::new(0.3, -0.2);
        assert_eq!(coherent_overlap(a, a, 0.0), 1.0);
        assert_relative_eq!(
            coherent_overlap(Complex64::new(1.0, 0.0), a * 0.0, 0.0),
            (-0.5f64).exp()
        );
    }

    #[test]
    fn worst_case_overlap_is_third_term() {
        let inp = fig3(1.0, 0.0);
        let a = inp.amplitude_unit();
        let ov = coherent_overlap(
            Complex64::new(3.0 * a, 0.0),
            Complex64::new(-3.0 * a, 0.0),
            -2.0 * a,
        );
        assert_relative_eq!(ov, (-inp.third_term()).exp(), max_relative = 1e-14);
    }

    #[test]
    fn fig3_terms() {
        let inp = fig3(1.0, 0.05);
        assert!(
            (inp.third_term() - 0.068).abs() < 0.002,
            "{}",
            inp.third_term()
        );
        let r = gyro_contrast_bound(&inp);
        assert!(
            (r.contrast_zero_t - 0.93).abs() < 0.01,
            "{}",
            r.contrast_zero_t
        );
        let wide = gyro_contrast_bound(&fig3(7.0, 0.05));
        assert!(wide.contrast_zero_t < r.contrast_zero_t);
        let c = PhysicalConstants::default();
        let dx = delta_x(0.01, 0.01, 3.0995e-32, c.mu_nv, 2.0 * PI * 1e4, c.hbar);
        assert_relative_eq!(dx, 2.0 * inp.amplitude_unit(), max_relative = 1e-12);
        assert!((dx - 0.092).abs() < 0.002, "{dx}");
        let dx4 = delta_x(0.01, 0.01, 3.0995e-32, c.mu_nv, 8.0 * PI * 1e4, c.hbar);
        assert_relative_eq!(dx4 / dx, 4f64.powf(-1.5), max_relative = 1e-12);
    }

    #[test]
    fn trivial_limits() {
        let mut inp = fig3(1.0, 0.0);
        inp.theta0 = 0.0;
        let r = gyro_contrast_bound(&inp);
        assert_eq!(r.contrast_zero_t, 1.0);
        assert_eq!(r.contrast_thermal, 1.0);
        let inp = fig3(1.0, 0.05);
        assert_eq!(
            gyro_contrast_bound(&inp).contrast_thermal,
            gyro_contrast_bound(&inp).contrast_zero_t
        );
    }

    #[test]
    fn thermal_fig4_point() {
        let inp = fig3(1.0, 0.0).at_omega0(2.0 * PI * 5e4, 0.0, 0.0);
        let r = thermal_contrast_bound(&inp, 20.0);
        assert!((r.third_term_exponent - 5.4e-4).abs() < 0.2e-4);
        assert!(r.contrast_thermal > 0.975 && r.contrast_thermal < r.contrast_zero_t);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let hbar = PhysicalConstants::default().hbar;
        for (d, w) in [(0.05, 1.0), (0.05, 7.0), (0.3, 3.0), (2.0, 1.0)] {
            let q = gaussian_phase_integral(d, w * hbar, hbar, QUADRATURE_NODES);
            assert!(
                (q - (-0.5 * (d * w).powi(2)).exp()).abs() < 1e-12,
                "{d} {w} {q}"
            );
        }
        let inp = fig3(7.0, 0.05);
        let r = gyro_contrast_bound(&inp);
        assert!((r.contrast_full_integral - r.contrast_zero_t).abs() < 1e-10);
    }

    #[test]
    fn curve_shape() {
        let base = fig3(1.0, 0.0);
        let omegas: Vec<f64> = (1..=50).map(|k| 2.0 * PI * 1e3 * k as f64 * 2.0).collect();
        let rows = contrast_vs_omega0_curve(
            &base,
            &omegas,
            &[1.0, 7.0],
            &[0.0, 20.0],
            inverse_scaling(2.0 * PI * 1e4, 0.097, -0.097),
        );
        assert_eq!(rows.len(), 200);
        for fam in rows.chunks(omegas.len()) {
            assert!(fam.windows(2).all(|w| w[1].contrast >= w[0].contrast));
        }
        for (a, b) in rows[..100].iter().zip(&rows[100..]) {
            assert!(a.contrast > b.contrast);
        }
        assert_relative_eq!(rows[4].omega0_hz, 1e4, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn inputs() -> impl Strategy<Value = ContrastInputs> {
            (
                0.0f64..0.5,
                -0.5f64..0.5,
                0.0f64..10.0,
                0.0f64..0.05,
                1e3f64..1e6,
            )
                .prop_map(|(dphi, dpsi, dp, th, w)| {
                    let c = PhysicalConstants::default();
                    ContrastInputs::new(
                        dphi,
                        dpsi,
                        dp * c.hbar,
                        c.mu_nv,
                        0.01,
                        th,
                        3.0995e-32,
                        w,
                        c.hbar,
                    )
                })
        }

        proptest! {
            #[test]
            fn bounded_and_monotone(inp in inputs(), n in 0.0f64..50.0, f in 1.0f64..3.0) {
                let r = thermal_contrast_bound(&inp, n);
                prop_assert!((0.0..=1.0).contains(&r.contrast_thermal));
                prop_assert!(r.contrast_thermal <= r.contrast_zero_t);
                let c = |i: &ContrastInputs| thermal_contrast_bound(i, n).contrast_thermal;
                let base = c(&inp);
                let wider_phi = c(&ContrastInputs { delta_phi: inp.delta_phi * f, ..inp });
                let wider_dp = c(&ContrastInputs { dp_psi: inp.dp_psi * f, ..inp });
                let tilted = c(&ContrastInputs { theta0: inp.theta0 * f, ..inp });
                let faster = c(&ContrastInputs { omega0: inp.omega0 * f, ..inp });
                prop_assert!(wider_phi <= base && wider_dp <= base && tilted <= base);
                prop_assert!(faster >= base);
                prop_assert!(thermal_contrast_bound(&inp, n + f).contrast_thermal <= r.contrast_thermal);
            }

            #[test]
            fn overlap_reflection_symmetry(a in (-3.0f64..3.0, -3.0f64..3.0), b in (-3.0f64..3.0, -3.0f64..3.0)) {
                let (a, b) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
                prop_assert!((coherent_overlap(a, b, 0.0) - coherent_overlap(a.conj(), b.conj(), 0.0)).abs() < 1e-15);
                prop_assert!((coherent_overlap(a, b, 0.0) - coherent_overlap(-a, -b, 0.0)).abs() < 1e-15);
                prop_assert!((coherent_overlap(a, b, 0.0) - coherent_overlap(b, a, 0.0)).abs() < 1e-15);
            }
        }
    }
}
