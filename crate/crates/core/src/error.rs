use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("exact tie between variables {0} and {1}; selection is ill-defined")]
    Tie(usize, usize),

    #[error("truncation region has negligible Gaussian mass (log-mass {log_mass})")]
    DegenerateRegion { log_mass: f64 },

    #[error("response lies outside the selection event (max violation {violation:e})")]
    NotInEvent { violation: f64 },

    #[error("inconsistent truncation bounds: V- = {v_minus}, V+ = {v_plus}")]
    InconsistentBounds { v_minus: f64, v_plus: f64 },

    #[error("root bracketing failed after {doublings} doublings")]
    BracketFailed { doublings: usize },

    #[error("polytope is empty")]
    Infeasible,

    #[error("active set of size {size} exceeds the sign-union cap {cap}")]
    SignUnionCap { size: usize, cap: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
