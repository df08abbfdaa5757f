use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("time {0} s lies outside the protocol domain (t >= 0)")]
    Domain(f64),

    #[error("invalid protocol: {0}")]
    Protocol(String),

    /// The rotational equilibrium does not exist (ω₀² ≤ μ s B_c / I).
    #[error("rotational instability: {0}")]
    Regime(String),

    #[error("integration failed at t = {t:.9e} s: {reason}")]
    Integration { t: f64, reason: String },

    #[error("interferometer did not close after {iterations} iterations (|dz| = {residual_z:.3e} m, |dp| = {residual_p:.3e} kg m/s)")]
    Closure {
        iterations: usize,
        residual_z: f64,
        residual_p: f64,
    },

    #[error("series mismatch: {0}")]
    Grid(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Configuration problems map to exit code 2, numerical failures to 3.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Parameter { .. }
            | Error::Protocol(_)
            | Error::Unsupported(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
