use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {degree} exceeds the cap of {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("orthonormality certificate failed for {family} at pair ({i}, {j}): |gram - identity| = {deviation:e}")]
    BasisInconsistency {
        family: String,
        i: usize,
        j: usize,
        deviation: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:e} (target {target:e})")]
    QuadratureFailure { achieved: f64, target: f64 },

    #[error("basis family does not match the reference measure: {0}")]
    BasisMismatch(String),

    #[error("null specification is invalid: {0}")]
    InvalidNull(String),

    #[error("coefficient method {method} is not available: {reason}")]
    MethodUnavailable { method: String, reason: String },

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigen:e})")]
    NotPositiveSemidefinite { min_eigen: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("all eigenvalues fall below the condition floor {floor:e}")]
    RankZero { floor: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("data sample is empty")]
    EmptyData,

    #[error("{count} observation(s) outside the reference support, first indices {indices:?}")]
    DataDomain { count: usize, indices: Vec<usize> },

    #[error("invalid test configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
