use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("threshold removed all components")]
    ThresholdRemovedAll,

    #[error("degrees of freedom too small for dimension")]
    DofTooSmall,

    #[error("non-PD covariance encountered at iteration {iter}")]
    NonPdCovariance { iter: usize },

    #[error("incomplete recourse: second stage infeasible at u = {u:?}")]
    IncompleteRecourse { u: Vec<f64> },

    #[error("master problem infeasible: instance has no feasible first stage")]
    MasterInfeasible,

    #[error("dual polytope empty: recourse objective unbounded below")]
    DualPolytopeEmpty,

    #[error("branch-and-bound node limit {limit} exceeded (incumbent objective {incumbent:?})")]
    NodeLimit { limit: usize, incumbent: Option<f64> },

    #[error("simplex iteration limit exceeded")]
    SimplexIterationLimit,

    #[error("scenario count {got} exceeds cap {cap}; subsample the scenarios first")]
    ScenarioCap { got: usize, cap: usize },

    #[error("vertex enumeration limited to dim <= {max}, got {got}")]
    EnumerationDim { got: usize, max: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
