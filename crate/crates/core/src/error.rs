use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or weight shapes disagree with what a layer expects.
    #[error("shape mismatch at layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },

    /// A genome produces a degenerate network for the given input.
    #[error("invalid genome at layer {layer}: {msg}")]
    Validity { layer: usize, msg: String },

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    UnsupportedVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Training produced non-finite values.
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("lineage mismatch: {0}")]
    Lineage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing {what} for individual {id}")]
    Missing { what: &'static str, id: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(layer: usize, msg: impl Into<String>) -> Self {
        Error::Shape {
            layer,
            msg: msg.into(),
        }
    }

    pub(crate) fn parse(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            msg: msg.into(),
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
