use thiserror::Error;

use crate::solver::SparseCoefficients;

pub type Result<T> = std::result::Result<T, SiabfError>;

#[derive(Debug, Error)]
pub enum SiabfError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),

    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("gap at series boundary (index {index}); cannot interpolate")]
    BoundaryGap { index: usize },

    #[error("series contains {count} gap(s); interpolate first")]
    GapsPresent { count: usize },

    #[error("zero variance: series is constant and cannot be standardized")]
    ZeroVariance,

    #[error("degenerate spectrum: maximum amplitude is zero")]
    DegenerateSpectrum,

    #[error("basis specification has no columns")]
    EmptySpec,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: predictions have {predictions} values, truth has {truth}")]
    LengthMismatch { predictions: usize, truth: usize },

    #[error("coordinate descent did not converge after {iterations} sweeps (last change {last_change:e})")]
    NoConvergence {
        iterations: usize,
        last_change: f64,
        partial: Box<SparseCoefficients>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("prediction overflow at horizon step {step}")]
    NonFinitePrediction { step: u64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl SiabfError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SiabfError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
