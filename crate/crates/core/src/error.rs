use thiserror::Error;

use crate::calibration::CalibrationResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// `theta(0)` diverges when `h(0) < 1/2`.
    #[error("singular point: {0}")]
    Singular(String),

    #[error(
        "ill-conditioned covariance kernel on grid {grid:?} (minimum eigenvalue estimate {min_eigenvalue:e})"
    )]
    IllConditioned { grid: Vec<f64>, min_eigenvalue: f64 },

    /// No restart met the convergence tolerance; the best run is attached.
    #[error("calibration did not converge (best mse {:.6e})", .0.mse)]
    NonConvergence(Box<CalibrationResult>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Parse { .. } | Error::EmptyInput(_) | Error::Io(_)
        )
    }
}
