use thiserror::Error;

/// Errors raised across the simulator and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero propagation distance makes the large-scale gain singular")]
    ZeroDistance,

    #[error("pilot interval {interval} exceeds the subcarrier count {subcarriers}")]
    PilotInterval { interval: usize, subcarriers: usize },

    #[error("scenario generation failed after {0} attempts")]
    ScenarioRetries(usize),

    #[error("all-zero reference channel, NMSE undefined")]
    ZeroReference,

    #[error("user cannot be localized: {0}")]
    Unlocalizable(String),

    #[error("eigendecomposition did not produce a usable subspace")]
    Subspace,

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
