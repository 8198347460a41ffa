use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("size error: {0}")]
    Size(String),
    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },
    #[error("tuning failed: all {0} trials diverged")]
    TuningFailed(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by a run going wrong.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Size(_) | Error::Label { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
