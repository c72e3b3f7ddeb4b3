use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Structured input did not match the expected schema. `path` is the
    /// dotted field path of the offending value.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("io error on {path}: {source}")]
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
    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Argument(_) => "argument",
            Error::Optimization(_) => "optimization",
            Error::Schema { .. } => "schema",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
