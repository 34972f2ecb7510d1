//! Crate-wide error type.
//!
//! Variants are grouped by how a caller should react: configuration mistakes
//! (fix the config), data problems (fix the input), and numerical failures
//! (the computation itself broke down). The CLI maps these groups onto
//! distinct process exit codes.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// The data set is too small for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Input data is malformed (unparseable rows, non-finite values, ...).
    #[error("data error: {0}")]
    Data(String),

    /// The input geometry admits no meaningful answer (e.g. all covariate
    /// rows identical, or a constant input dimension).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// An iterative optimization produced a non-finite value.
    #[error("diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    /// The kernel-curve fit did not converge.
    #[error("curve fit failed to converge: residual {residual}")]
    CurveFit { residual: f64 },

    /// A matrix factorization or solve failed beyond recovery.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV-level failure while reading observations.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Artifact (de)serialization failure.
    #[error("artifact error: {0}")]
    Artifact(#[from] serde_json::Error),
}

/// Coarse classification used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Usage or configuration problem (exit code 1).
    Config,
    /// Problem with the input data (exit code 2).
    Data,
    /// Numerical breakdown during computation (exit code 3).
    Numerical,
}

impl Error {
    /// Classify this error for exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::InsufficientData(_)
            | Error::Data(_)
            | Error::DegenerateGeometry(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::Diverged { .. }
            | Error::CurveFit { .. }
            | Error::Numerical(_)
            | Error::Artifact(_) => ErrorClass::Numerical,
        }
    }
}
