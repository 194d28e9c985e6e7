use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("construction failure: {0}")]
    ConstructionFailure(String),

    #[error("id out of range: {what} {id} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        id: usize,
        limit: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("gap minimum undefined: every action is optimal everywhere")]
    UndefinedGapMin,

    #[error("learner invariant violated at episode {episode}: {message}")]
    LearnerInvariant { episode: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable kind, used in the CLI's stderr JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidMdp(_) => "invalid_mdp",
            Error::ConstructionFailure(_) => "construction_failure",
            Error::OutOfRange { .. } => "out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UndefinedGapMin => "undefined_gap_min",
            Error::LearnerInvariant { .. } => "learner_invariant",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
