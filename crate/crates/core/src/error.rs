use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent sizes or arguments supplied by the caller.
    Usage(String),
    /// Parameters that violate a model invariant.
    InvalidParameter(String),
    /// The implicit system of a time step could not be factorized.
    SingularStep { dt: f64, hint: String },
    /// A non-finite value appeared in the state at the given step.
    BlowUp { step: usize },
    /// The Picard iteration stopped contracting.
    ContractionFailure { iteration: usize, ratio: f64 },
    /// An actuator design lies outside the region where its support fits.
    ProjectionRequired(String),
    /// Unexpected numerical breakdown.
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SingularStep { dt, hint } => {
                write!(f, "implicit step matrix is singular for dt = {dt:e} ({hint})")
            }
            Error::BlowUp { step } => write!(f, "non-finite state detected at step {step}"),
            Error::ContractionFailure { iteration, ratio } => write!(
                f,
                "Picard iteration is not contracting (ratio {ratio:.3} at iteration {iteration}); \
                 try a shorter horizon"
            ),
            Error::ProjectionRequired(msg) => {
                write!(
                    f,
                    "actuator design must be projected into the admissible set: {msg}"
                )
            }
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
