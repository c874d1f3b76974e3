use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate embedding: {0} has zero norm")]
    ZeroNorm(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("backward root has no tracked ancestors")]
    DetachedRoot,

    #[error("graph already back-propagated; clear gradients before calling backward again")]
    GraphConsumed,

    #[error("support violation: p[{index}] > 0 where q[{index}] = 0")]
    SupportViolation { index: usize },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("parameter record rejected: {0}")]
    Manifest(String),

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(
        "training diverged at round {round}, client {client}, step {step}: \
         local_c={local_c} local_r={local_r} global_c={global_c} global_r={global_r}"
    )]
    Divergence {
        round: usize,
        client: usize,
        step: usize,
        local_c: f64,
        local_r: f64,
        global_c: f64,
        global_r: f64,
    },

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
