use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A file header could not be parsed; `field` names the offending entry.
    #[error("format error in `{field}`: {message}")]
    Format { field: String, message: String },

    /// Payload size does not match the declared dimensions.
    #[error("size error: expected {expected} bytes of payload, found {found}")]
    Size { expected: usize, found: usize },

    /// Two grids or tensors whose shapes must agree do not.
    #[error("shape error: {0}")]
    Shape(String),

    /// A feature region (mask) is empty or yields no usable statistics.
    #[error("region error: {0}")]
    Region(String),

    /// Network weights are inconsistent with the layer specification.
    #[error("weight error: {0}")]
    Weight(String),

    /// Invalid argument to a statistical routine.
    #[error("argument error: {0}")]
    Argument(String),

    /// Forest training could not proceed.
    #[error("training error: {0}")]
    Training(String),

    /// A median split left one group empty (threshold attached).
    #[error("degenerate median split at threshold {0}")]
    DegenerateSplit(f64),

    /// Feature table and manifest disagree on patient ids.
    #[error("join error: orphan patient ids {0:?}")]
    Join(Vec<String>),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(field: &str, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
