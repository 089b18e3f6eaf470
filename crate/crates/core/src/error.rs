use thiserror::Error;

pub type Result<T> = std::result::Result<T, LdpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("covariance is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("covariance factorization failed after jitter levels {jitters:?}")]
    FactorizationFailed { jitters: Vec<f64> },

    #[error("speed function is not usable at n = {n}: {reason}")]
    InvalidSpeed { n: u64, reason: String },

    #[error("point lies outside the covariance range (rate is infinite)")]
    InfiniteRate,

    #[error("brute-force conjugate supports at most 4 dimensions, got {0}")]
    OracleDimension(usize),

    #[error("target set is empty")]
    Infeasible,

    #[error("rate minimization did not converge after {restarts} restarts (best value {best_value}, KKT residual {residual:e})")]
    NonConvergence {
        restarts: usize,
        best_value: f64,
        residual: f64,
    },

    #[error("Fernique hypothesis fails: exceedance probability {beta} (upper {beta_hi}) is not below 1/2")]
    FerniqueRefused { beta: f64, beta_hi: f64 },

    #[error("exponent a = {a} exceeds the admissible bound a_max = {a_max}")]
    ExponentTooLarge { a: f64, a_max: f64 },

    #[error("speed g_n = {g} falls below M log n = {bound} at n = {n}")]
    SpeedTooSlow { n: u64, g: f64, bound: f64 },

    #[error("pair is not coupled: both sequences must be driven by the same seed stream")]
    UncoupledPair,

    #[error("decay fit needs at least 3 finite points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid Monte Carlo parameters: {0}")]
    InvalidMc(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LdpError {
    LdpError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
