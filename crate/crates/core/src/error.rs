use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arm point: {0}")]
    InvalidArm(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("bin budget exceeded: {bins} bins requested, budget is {budget}")]
    BinBudgetExceeded { bins: u128, budget: usize },

    #[error("grid needs at least 3 bins per axis, got {0}")]
    GridTooCoarse(usize),

    #[error("invalid bandit parameters: {0}")]
    InvalidBandit(String),

    #[error("bandit horizon of {0} rounds is exhausted")]
    HorizonExhausted(u64),

    #[error("reward {0} lies outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("arm {arm} out of range for a bandit with {n_arms} arms")]
    ArmOutOfRange { arm: usize, n_arms: usize },

    #[error("gamma = {gamma} outside the admissible interval (0, {upper}) for d = {d}")]
    GammaOutOfRange { gamma: f64, upper: f64, d: usize },

    #[error("horizon T = {horizon} too small: {reason}")]
    HorizonTooSmall { horizon: u64, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("trace invariant violated: {0}")]
    TraceInvariant(String),

    #[error("scaling fit failed: {0}")]
    ScalingFit(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
