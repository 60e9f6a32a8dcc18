use thiserror::Error;

/// Errors surfaced by game construction, model building and the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite payoff at entry {index}")]
    NonFinitePayoff { index: usize },

    #[error("duplicate strategy label {label:?} for player {player}")]
    DuplicateLabel { player: usize, label: String },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid engineering spec: {0}")]
    InvalidSpec(String),

    #[error("model too large: {entries} payoff entries exceeds the limit of {limit}")]
    ModelTooLarge { entries: usize, limit: usize },

    #[error("integer cut needs a nonempty support")]
    EmptySupport,

    #[error("numerical instability: {0}")]
    Numerical(String),

    #[error("infeasible: {0}")]
    Infeasible(crate::pipeline::InfeasibilityReport),

    #[error("result is not optimal: {0}")]
    NotOptimal(String),

    #[error("inconsistent solver output: {0}")]
    Inconsistent(String),

    #[error("verification failed: {summary}")]
    VerificationFailed { summary: String, dump: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
