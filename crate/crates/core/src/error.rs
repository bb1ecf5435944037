use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampling window does not contain enough of a function's mass.
    #[error("window truncation: {what} loses {lost:.3e} of its mass outside the grid (limit {limit:.1e})")]
    Truncation { what: String, lost: f64, limit: f64 },

    #[error("grid step {step} um is too coarse; at most {limit} um is required")]
    Resolution { step: f64, limit: f64 },

    /// A retained guided mode still has significant amplitude at the edge of the window.
    #[error("mode {mode} has edge amplitude {ratio:.3e} of its peak; widen the padding")]
    Window { mode: usize, ratio: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The herald probability vanished: photon B never reaches the detector.
    #[error("degenerate herald: normalization {0:.3e} is below 1e-12")]
    DegenerateHerald(f64),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Configuration validation failure naming the offending key.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
