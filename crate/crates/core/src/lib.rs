//! Stern-Gerlach interferometry of a spinning nanodiamond.
//!
//! The crate covers the translational motion of the two arms in a staged
//! magnetic field, the Euler-angle rotational dynamics of the particle, the
//! non-rotating {0, −1} baseline scheme, the NV three-level spin in the
//! rotating frame, and the spin-contrast bounds built from all of these.

pub mod contrast;
pub mod error;
pub mod field;
pub mod model;
pub mod ode;
pub mod roots;
pub mod rotational;
pub mod scenario;
pub mod spin;
pub mod static_scheme;
pub mod translational;

pub use error::{Error, Result};
pub use field::{b_nv, FieldProtocol, Stage};
pub use model::{
    derive_inertia, units, validate_regime, ParticleParams, PhysicalConstants, QuantumInit,
    RegimeReport, RotationInit,
};
pub use rotational::{
    delta_phi_area, delta_theta_bound, hamilton_rhs, hamiltonian, integrate_full,
    integrate_linearized, theta_bar, ArmDrive, MismatchReport, RotationSolver, RotationalState,
    Rotor,
};
pub use translational::{
    close_interferometer, superposition_size_eq, trap_frequency, Arm, ArmPath, Closure,
    ClosureOptions, Scheme, Spin, SpinBranch, TranslationalModel, TranslationalState,
};
