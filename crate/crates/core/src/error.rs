use std::path::PathBuf;

/// Errors raised anywhere in the identification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The weighted inversion lost numerical rank at `step`.
    #[error("ill-conditioned inversion at step {step}: {detail}")]
    IllConditioned { step: usize, detail: String },

    /// The sensor layout cannot support the requested estimator.
    #[error("structural rank condition violated: {0}")]
    StructuralRank(String),

    #[error("parse error in {path} at row {row}: {detail}")]
    Parse {
        path: PathBuf,
        row: usize,
        detail: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no feasible point: every evaluated configuration failed")]
    NoFeasiblePoint,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
