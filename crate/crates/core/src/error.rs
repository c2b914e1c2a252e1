use thiserror::Error;

/// Errors raised by the solvers and the model types they consume.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("density is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("need at least 2 distinct sample points, got {0}")]
    TooFewSamples(usize),

    #[error("measure has an atom at {0}; only atomless marginals are supported")]
    Atom(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate cost: {0}")]
    Degenerate(String),

    #[error("no essential pieces in the working box")]
    NoEssentialPieces,

    #[error("split equation has no root in the truncated supports (g = {g_lo} at the left end, {g_hi} at the right end)")]
    RootBracket { g_lo: f64, g_hi: f64 },

    #[error("partition order {0} exceeds the supported maximum of 8")]
    OrderTooLarge(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("at least 2 marginals are required, got {0}")]
    TooFewMarginals(usize),

    #[error("unbalanced marginals: total weights {0} and {1}")]
    Unbalanced(f64, f64),

    #[error("problem size exceeds oracle limits: {0}")]
    SizeLimit(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
