use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GpdError>;

#[derive(Debug, Error)]
pub enum GpdError {
    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("length mismatch in {context}: expected {expected}, got {actual}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("step {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },

    #[error("prompt length {prompt} plus horizon {horizon} exceeds the model window {window}")]
    HorizonTooLong {
        prompt: usize,
        horizon: usize,
        window: usize,
    },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("non-finite values produced: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing value at row {row}, column '{column}' (blank cells are only accepted by impute)")]
    MissingValue { row: usize, column: String },

    #[error("split part '{part}' has {len} points, shorter than window {window}")]
    SplitTooShort {
        part: &'static str,
        len: usize,
        window: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl GpdError {
    /// Errors caused by what the caller asked for rather than by the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            GpdError::InvalidRange(_)
                | GpdError::HorizonTooLong { .. }
                | GpdError::InvalidArgument(_)
                | GpdError::Config(_)
                | GpdError::StepOutOfRange { .. }
                | GpdError::SplitTooShort { .. }
        )
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(GpdError::LengthMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
