use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {node}")]
    Numeric { node: String },

    #[error("reconstruction residue {residue:.3e} exceeds bound {bound:.3e}")]
    Residue { residue: f64, bound: f64 },

    #[error("covariance needs at least 2 samples per domain, got {0}")]
    InsufficientSamples(usize),

    #[error("alignment needs at least 2 domains, got {0}")]
    InsufficientDomains(usize),

    #[error("degenerate test: {0}")]
    Degenerate(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingFailure { epoch: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file at byte offset {offset}: expected {expected} bytes, found {actual}")]
    Corruption {
        offset: u64,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
