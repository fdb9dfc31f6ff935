use std::path::PathBuf;

use thiserror::Error;

use crate::model::EpochLosses;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    /// Loss became NaN or infinite. `history` holds every epoch completed
    /// before the failure so callers can still persist it.
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged {
        epoch: usize,
        history: Vec<EpochLosses>,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
