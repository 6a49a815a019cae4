//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the measurement, localization, trajectory and harness
/// layers. Configuration problems get their own variant so the CLI can map
/// them to a distinct exit code.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// UAV and emitter coincide; the range (and thus Doppler/ToA) is undefined.
    #[error("zero range between UAV and emitter (invalid geometry)")]
    ZeroRange,

    /// Frame velocity is (numerically) zero; Doppler carries no information
    /// and the line-of-minimizers condition does not exist.
    #[error("degenerate frame velocity (|v| = {speed:.3e} m/s)")]
    DegenerateVelocity { speed: f64 },

    /// The normal matrix is singular for every multiplier value tried.
    #[error("singular constrained LS system: {0}")]
    SingularSystem(String),

    /// The constraint function has no sign change over the expanded
    /// multiplier bracket; callers may fall back to the unconstrained
    /// solution.
    #[error("no root of the constraint function in the multiplier bracket")]
    NoConstraintRoot,

    /// Fewer measurements than unknowns.
    #[error("insufficient measurements: need at least {required}, got {provided}")]
    InsufficientMeasurements { required: usize, provided: usize },

    /// UAV is exactly above the emitter estimate; no velocity direction is
    /// preferred by the design equations.
    #[error("degenerate trajectory geometry (UAV directly above the estimate)")]
    DegenerateGeometry,

    /// Invalid scenario configuration; message names the offending field.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
