//! Error taxonomy shared by every module.
//!
//! Variants map onto process exit codes at the CLI boundary: configuration
//! problems exit 2, data/format problems exit 3, numeric divergence exits 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape disagreement between operands; message carries both shapes.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// Invalid configuration value or combination.
    #[error("invalid config: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Binary file violates the expected layout; offset is from file start.
    #[error("{path}: format error at byte {offset}: {reason}")]
    Format {
        path: String,
        offset: u64,
        reason: String,
    },

    /// Non-finite value escaped a training step.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    /// Softmax row with every position masked out.
    #[error("degenerate mask: row {row} has no visible position")]
    DegenerateMask { row: usize },

    /// Rotation projection given a rank-deficient matrix.
    #[error("degenerate rotation: {0}")]
    DegenerateRotation(String),

    /// Audio shorter than the analysis requires.
    #[error("insufficient audio: {0}")]
    InsufficientAudio(String),

    /// Motion sequence shorter than the computation requires.
    #[error("insufficient frames: {0}")]
    InsufficientFrames(String),

    /// Metric input outside its defined domain (empty set, size < 2, ...).
    #[error("metric input: {0}")]
    MetricInput(String),

    /// Music does not cover the requested generation horizon.
    #[error("music coverage: need {required} feature frames, have {available}")]
    Coverage { required: usize, available: usize },

    /// Windowing produced no usable training windows.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// No leakage-free train/test split exists.
    #[error("split infeasible: {0}")]
    SplitInfeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Divergence(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn dimension(op: &'static str, detail: impl Into<String>) -> Error {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
