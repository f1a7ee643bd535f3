use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimators, the simulator and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode {mode} for an order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("need at least {required} time steps, got {actual}")]
    InsufficientSteps { required: usize, actual: usize },

    #[error("non-finite entry in input matrix")]
    NonFinite,

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("projected data is identically zero for mode {mode}")]
    DegenerateProjection { mode: usize },

    #[error("dead coordinate {index}: zero variance on the diagonal")]
    DeadCoordinate { index: usize },

    #[error("rank {rank} exceeds dimension {dim} of mode {mode}")]
    RankTooLarge { mode: usize, rank: usize, dim: usize },

    #[error("non-stationary AR coefficients (spectral radius {radius:.4})")]
    NonStationary { radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported estimator `{0}`")]
    UnsupportedEstimator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-parseable category used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidMode { .. }
            | Error::ShapeMismatch(_)
            | Error::RankTooLarge { .. }
            | Error::InsufficientSteps { .. } => "shape",
            Error::NonFinite
            | Error::DegenerateCovariance(_)
            | Error::DegenerateProjection { .. }
            | Error::DeadCoordinate { .. }
            | Error::NonStationary { .. } => "numeric",
            Error::InvalidParameter(_) | Error::UnsupportedEstimator(_) => "parameter",
            Error::Config(_) => "config",
            Error::Parse(_) | Error::Csv(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
