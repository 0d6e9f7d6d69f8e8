use magop_tensor::TensorError;
use thiserror::Error;

use crate::preisach::PreisachError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Preisach(#[from] PreisachError),
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: PreisachError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("covariance factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },
    #[error("shape: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} at epoch {epoch}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("format: {0}")]
    Format(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
