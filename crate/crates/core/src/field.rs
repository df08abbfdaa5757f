//! Time-staged magnetic field.
//!
//! ```text
//! t < τ₁        B = (B₀ − ηz) ẑ + ηx x̂        gradient η̃ = −η
//! τ₁ ≤ t < τ₂   B = B₁ ẑ                      η̃ = 0
//! t ≥ τ₂        B = −(B₀ − ηz) ẑ − ηx x̂       η̃ = +η
//! ```
//!
//! Stage intervals are half-open: a boundary instant belongs to the later stage.
//! τ₃ (spin flip) and τ₄ (closure) do not change the field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Gradient,
    Uniform,
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldProtocol {
    /// T
    pub b0: f64,
    /// T
    pub b1: f64,
    /// T/m
    pub eta: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// spin flip
    pub tau3: f64,
    /// closure / measurement
    pub tau4: f64,
}

impl FieldProtocol {
    pub fn new(b0: f64, b1: f64, eta: f64, taus: [f64; 4]) -> Result<Self> {
        let p = Self {
            b0,
            b1,
            eta,
            tau1: taus[0],
            tau2: taus[1],
            tau3: taus[2],
            tau4: taus[3],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b0", self.b0), ("b1", self.b1), ("eta", self.eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Protocol(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let t = self.taus();
        if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2] && t[2] < t[3] && t[3].is_finite()) {
            return Err(Error::Protocol(format!(
                "stage times must satisfy 0 < tau1 < tau2 < tau3 < tau4, got {t:?}"
            )));
        }
        Ok(())
    }

    pub fn taus(&self) -> [f64; 4] {
        [self.tau1, self.tau2, self.tau3, self.tau4]
    }

    pub fn with_taus(&self, taus: [f64; 4]) -> Result<Self> {
        Self::new(self.b0, self.b1, self.eta, taus)
    }

    /// Z₀ = B₀/η, the field zero of the gradient stages.
    pub fn z0(&self) -> f64 {
        self.b0 / self.eta
    }

    /// Stage at `t`, assuming `t >= 0`.
    #[inline]
    pub fn stage(&self, t: f64) -> Stage {
        if t < self.tau1 {
            Stage::Gradient
        } else if t < self.tau2 {
            Stage::Uniform
        } else {
            Stage::Reversed
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if t >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(t))
        }
    }

    #[inline]
    pub fn eta_at(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Gradient => -self.eta,
            Stage::Uniform => 0.0,
            Stage::Reversed => self.eta,
        }
    }

    /// Signed gradient η̃(t).
    pub fn gradient_sign(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.eta_at(self.stage(t)))
    }

    /// (B_z, B_x) at `(z, x)`.
    pub fn field_vector(&self, t: f64, z: f64, x: f64) -> Result<(f64, f64)> {
        Self::check_time(t)?;
        Ok(match self.stage(t) {
            Stage::Gradient => (self.b0 - self.eta * z, self.eta * x),
            Stage::Uniform => (self.b1, 0.0),
            Stage::Reversed => (-(self.b0 - self.eta * z), -self.eta * x),
        })
    }

    /// Field magnitude at the centre of mass on the x = 0 axis.
    pub fn b_com(&self, t: f64, z: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.b_com_in(self.stage(t), z))
    }

    #[inline]
    pub fn b_com_in(&self, stage: Stage, z: f64) -> f64 {
        match stage {
            Stage::Uniform => self.b1,
            _ => (self.b0 - self.eta * z).abs(),
        }
    }

    /// Boundaries inside `(0, t_end)` at which either the field or the spin changes.
    pub fn breakpoints(&self, t_end: f64) -> Vec<f64> {
        [self.tau1, self.tau2, self.tau3]
            .into_iter()
            .filter(|&t| t > 0.0 && t < t_end)
            .collect()
    }
}

/// Field strength at the NV site:
/// `B_c + η̃ d (cos α cos θ + sin θ sin α cos ψ)`.
#[inline]
pub fn b_nv(b_c: f64, eta_t: f64, theta: f64, psi: f64, d: f64, alpha: f64) -> f64 {
    b_c + eta_t * d * (alpha.cos() * theta.cos() + theta.sin() * alpha.sin() * psi.cos())
}
