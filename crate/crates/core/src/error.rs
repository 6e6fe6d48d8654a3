use thiserror::Error;

/// Errors raised by the batch-queue library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model description violates one of its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The simulator cannot run the requested configuration.
    #[error("simulation configuration error: {0}")]
    SimConfig(String),
    /// Order statistics coincide, so the routing matrix is undefined.
    #[error("degenerate service distribution: {0}")]
    DegenerateService(String),
    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    Singular(String),
    /// A ratio has a zero denominator.
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
