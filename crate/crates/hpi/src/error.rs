use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// Construction errors carry enough context to name the offending player,
/// coordinate or file; numeric errors report what made the computation
/// impossible rather than returning NaN.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration space: {0}")]
    InvalidSpace(String),

    #[error("invalid domain for player `{player}`: {reason}")]
    InvalidDomain { player: String, reason: String },

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("player index {index} out of range for {n} players")]
    PlayerOutOfRange { index: usize, n: usize },

    #[error("coalition mask {mask:#x} has bits set beyond player {n}")]
    MaskOutOfRange { mask: u32, n: usize },

    #[error("coalitions over different player sets: {left} vs {right} players")]
    CoalitionMismatch { left: usize, right: usize },

    #[error("configuration is not a member of the space: coordinate {index} ({player}) has value {value}")]
    NotAMember {
        index: usize,
        player: String,
        value: String,
    },

    #[error("exact enumeration unavailable: {0}")]
    ExactUnavailable(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid optimizer: {0}")]
    InvalidOptimizer(String),

    #[error("no performance recorded for configuration {config}")]
    MissingRow { config: String },

    #[error("oracle returned a non-finite value ({value}) for configuration {config}")]
    NonFiniteValue { value: f64, config: String },

    #[error("game tables disagree: {0}")]
    GameMismatch(String),

    #[error("quantile level {0} is outside [0, 1]")]
    InvalidQuantile(f64),

    #[error("interaction order {order} is outside 1..={n}")]
    OrderOutOfRange { order: usize, n: usize },

    #[error("expected {expected} interaction values, got {got}")]
    IndexKindMismatch { expected: String, got: String },

    #[error("least-squares system is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("coalitions must be disjoint: {0}")]
    NotDisjoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
