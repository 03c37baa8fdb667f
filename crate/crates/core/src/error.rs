use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants split into input errors (bad shapes, bad parameters) and
/// physics errors (the computation itself is not well defined at the given
/// point, e.g. an exceptional point); see [`Error::is_physics`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter space must be {expected}-dimensional, got {found}")]
    DimensionError { expected: usize, found: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error(
        "exceptional point: normalized left/right overlap {overlap:.3e} of mode {mode} is below {threshold:.1e}"
    )]
    ExceptionalPoint {
        mode: usize,
        overlap: f64,
        threshold: f64,
    },
    #[error("cannot pair right and left eigenvalues: {0}")]
    PairingFailure(String),
    #[error("gauge constant {value} requested for mode {mode}, which is not occupied")]
    GaugeConflict { mode: usize, value: f64 },
    #[error("time step too large: dt*max|E|/hbar = {ratio:.3} exceeds {limit}")]
    StepTooLarge { ratio: f64, limit: f64 },
    #[error("mode tracking lost at path sample {step}: {reason}")]
    ModeTrackingLost { step: usize, reason: String },
    #[error("overlap phase jump of {phase:.3} rad at path step {step}; refine the path")]
    BranchJump { step: usize, phase: f64 },
    #[error("adiabaticity ratio {ratio:.3e} exceeds {limit}")]
    AdiabaticityViolated { ratio: f64, limit: f64 },
    #[error("trajectory is not closed: endpoint mismatch {mismatch:.3e} in component {component}")]
    NotClosed { component: usize, mismatch: f64 },
    #[error("no convergence after {iterations} iterations (last change {change:.3e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("target mode collapsed onto another (gap {gap:.3e})")]
    ModeCollapse { gap: f64 },
    #[error("linear algebra backend failed: {0}")]
    Linalg(String),
}

impl Error {
    /// True for failures of the physics/numerics rather than of the input.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::ExceptionalPoint { .. }
                | Error::PairingFailure(_)
                | Error::ModeTrackingLost { .. }
                | Error::BranchJump { .. }
                | Error::AdiabaticityViolated { .. }
                | Error::NoConvergence { .. }
                | Error::ModeCollapse { .. }
                | Error::NonFinite(_)
                | Error::Linalg(_)
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
