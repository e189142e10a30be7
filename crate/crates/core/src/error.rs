//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the precision-limit routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A PSF intensity vanishes inside its support, so a direct-imaging
    /// integral with the intensity in the denominator is undefined there.
    #[error("singular integrand: intensity vanishes at x = {at:.6} inside the support")]
    SingularIntegrand { at: f64 },

    /// A Fisher matrix is singular or too ill-conditioned to invert.
    #[error(
        "fisher matrix is singular (condition number {condition:.3e}); \
         least identifiable direction {null_direction:?} over {labels:?}"
    )]
    Singular {
        condition: f64,
        null_direction: Vec<f64>,
        labels: Vec<String>,
    },

    /// A sampled PSF does not decay to zero before the edge of its grid.
    #[error("grid too small: edge amplitude {edge:.3e} exceeds tolerance {tolerance:.1e}")]
    InsufficientGrid { edge: f64, tolerance: f64 },

    /// A position grid cuts off a displaced PSF before it has decayed.
    #[error("grid half-width {half_width:.4} too small; at least {required:.4} is needed")]
    GridTooNarrow { half_width: f64, required: f64 },

    /// Numerator and denominator of a small-separation series both vanish.
    #[error("series indeterminate: numerator and denominator vanish at d = {d}")]
    IndeterminateSeries { d: f64 },

    /// A regime specification violates the exponent constraints.
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    /// A separation schedule is not strictly decreasing towards zero.
    #[error("schedule must be strictly decreasing and positive")]
    NonMonotoneSchedule,

    /// An iterative routine failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Malformed external input (PSF files, JSON specifications).
    #[error("parse error: {0}")]
    Parse(String),

    /// Filesystem failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
