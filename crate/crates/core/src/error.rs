use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unresolved entity `{0}`")]
    UnresolvedEntity(String),

    #[error("remote endpoint error: {0}")]
    Remote(String),

    #[error("non-finite value in {tensor} at index {index}{context}")]
    Numeric {
        tensor: String,
        index: usize,
        context: String,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Attaches run context to a numeric error; other variants pass through.
    pub fn with_context(self, ctx: &str) -> Self {
        match self {
            Error::Numeric {
                tensor,
                index,
                context,
            } => Error::Numeric {
                tensor,
                index,
                context: format!("{context} ({ctx})"),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
