use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid feature map: {0}")]
    InvalidFeatures(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("trajectory not covered by tabular feature map: {0}")]
    Coverage(String),

    #[error("enumeration required: {0}")]
    EnumerationRequired(&'static str),

    #[error("enumeration size {size} exceeds cap {cap}")]
    EnumerationTooLarge { size: f64, cap: usize },

    #[error("mle did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("projection stagnated: {0}")]
    ProjectionStagnation(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// The error with round and seed context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Round { source, .. } | Error::Seed { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
