use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at x = {0}")]
    GammaPole(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "Mittag-Leffler E({rho}, {mu}; {z}) did not reach tolerance {tol:e} (estimate {estimate:e})"
    )]
    AccuracyNotReached {
        rho: f64,
        mu: f64,
        z: f64,
        estimate: f64,
        tol: f64,
    },

    #[error("point {point:?} lies outside the box {lengths:?}")]
    OutOfDomain { point: Vec<f64>, lengths: Vec<f64> },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("g changes sign on [{lo}, {hi}] (min {min}, max {max})")]
    SignChanging { lo: f64, hi: f64, min: f64, max: f64 },

    /// A solvability (orthogonality) condition fails for the listed 1-based mode indices.
    #[error("no solution: orthogonality condition violated for modes {indices:?}")]
    NoSolution { indices: Vec<usize>, values: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
