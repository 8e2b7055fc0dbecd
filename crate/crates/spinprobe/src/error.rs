//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = self::Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A set of physical constants violates its internal consistency rules.
    #[error("invalid constants: {0}")]
    Constants(String),

    /// A cross-section table is malformed or incomplete.
    #[error("cross-section table: {0}")]
    CrossSections(String),

    /// A cross-section CSV file could not be parsed.
    #[error("cross-section file {path}, line {line}: {message}")]
    CrossSectionFile {
        path: String,
        line: usize,
        message: String,
    },

    /// The rate spread is too large for the fixed-step integrator.
    #[error("stiff generator: rate spread {spread:.3e} exceeds 1e12; fixed-step integration would underflow")]
    StiffGenerator { spread: f64 },

    /// The transition rates admit no unique stationary distribution.
    #[error("no unique steady state: {0}")]
    NoSteadyState(String),

    /// A linear solve failed (singular or rank-deficient system).
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// A probability vector failed normalization checks.
    #[error("distribution not normalized: |sum - 1| = {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    /// Nonlinear least squares did not converge within the iteration budget.
    #[error("fit did not converge after {iterations} iterations (best residual RMS {rms:.3e}, params {params:?})")]
    FitDidNotConverge {
        iterations: usize,
        params: Vec<f64>,
        rms: f64,
    },

    /// One or more configuration fields failed validation.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
