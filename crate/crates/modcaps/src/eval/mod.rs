//! Evaluation artifacts: confusion matrices, accuracy-versus-SNR curves,
//! the dataset-shift experiment, and their plot-ready CSV forms.

mod confusion;
mod curve;
mod shift;

pub use confusion::{confusion, ConfusionMatrix};
pub use curve::{accuracy_vs_snr, SnrAccuracyCurve, SnrBin};
pub use shift::{shift_experiment, ShiftReport};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation request: {0}")]
    Invalid(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Train(#[from] crate::trainer::TrainError),
    #[error(transparent)]
    Signal(#[from] crate::modsig::SigError),
    #[error(transparent)]
    Data(#[from] crate::dataio::DataError),
    #[error(transparent)]
    Model(#[from] crate::capsnet::ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Writes one text artifact, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, content).map_err(io)
}
