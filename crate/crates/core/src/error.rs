use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("extent mismatch: expected {expected:?}, got {actual:?}")]
    ExtentMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    /// A non-finite value showed up in the primal-dual iteration.
    #[error("numerical divergence at inner iteration {iteration}{}", outer_suffix(*.outer))]
    Divergence {
        outer: Option<usize>,
        iteration: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("mask diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("invalid scale sequence: {0}")]
    Sequence(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn outer_suffix(outer: Option<usize>) -> String {
    match outer {
        Some(k) => format!(" of outer step {k}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
