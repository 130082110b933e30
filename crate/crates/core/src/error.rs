use thiserror::Error;

pub type Result<T, E = HnnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HnnError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structure matrix check failed: {0}")]
    Structure(String),

    #[error("singular coordinate transform (condition estimate {condition:.3e})")]
    SingularTransform { condition: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    Divergence { t: f64 },

    #[error("training diverged at iteration {iteration}: {reason}")]
    TrainingDivergence { iteration: usize, reason: String },

    #[error("dataset generation failed for trajectory {trajectory} (seed {seed}): {source}")]
    Dataset {
        trajectory: usize,
        seed: u64,
        #[source]
        source: Box<HnnError>,
    },

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HnnError {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        HnnError::DimensionMismatch {
            context,
            expected,
            got,
        }
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            HnnError::SingularTransform { .. }
            | HnnError::StepSizeUnderflow { .. }
            | HnnError::Divergence { .. }
            | HnnError::TrainingDivergence { .. } => true,
            HnnError::Dataset { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
