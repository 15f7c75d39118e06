use thiserror::Error;

/// Errors raised by estimation, fitting and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample must contain at least one observation")]
    EmptySample,
    #[error("group {group} has {size} subjects; at least {required} are required")]
    SampleTooSmall { group: usize, size: usize, required: usize },
    #[error("index {index} is out of range for a sample of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("observation {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },
    #[error("invalid survival curve: {0}")]
    InvalidCurve(String),
    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Newton solver did not converge after {iterations} iterations (|U|_inf = {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
        last_beta: Vec<f64>,
    },
    #[error("design matrix is singular (rank {rank} of {dim}) and strict mode forbids the pseudo-inverse")]
    SingularDesign { rank: usize, dim: usize },
    #[error("the analytic sandwich covariance requires uncensored data; use the bootstrap instead")]
    CensoredData,
    #[error("operation requires the identity link, got `{0}`")]
    NonIdentityLink(String),
    #[error("all {requested} bootstrap replicates failed to produce a converged fit")]
    AllReplicatesFailed { requested: usize },
    #[error("closed-form Weibull effect requires equal shapes (got {k1} and {k2})")]
    UnequalShapes { k1: f64, k2: f64 },
    #[error("fit did not converge; predictions are unavailable")]
    UnconvergedFit,
}

pub type Result<T> = std::result::Result<T, Error>;
