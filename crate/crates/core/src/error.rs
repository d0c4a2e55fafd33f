use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum WplError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("Nyquist guard violated: {required:.1} frequency samples required, {available} available")]
    Nyquist { required: f64, available: usize },
    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all-zero f")]
    ZeroProfile,
    #[error("too few points: {have} of positive weight, {need} needed")]
    TooFewPoints { have: usize, need: usize },
    #[error("optimizer did not reach imbalance {target}; best found {best:.4}")]
    OptimizerFailed { target: f64, best: f64 },
    #[error("unknown vertex '{0}'")]
    UnknownVertex(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("gradient vanished at {attempts} consecutive samples")]
    VanishingGradient { attempts: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, WplError>;
