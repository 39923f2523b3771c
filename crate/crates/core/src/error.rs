use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid coefficient selection: {0}")]
    InvalidSelection(String),

    #[error("invalid basis function: {0}")]
    InvalidBasis(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A state whose posterior pieces cannot be evaluated (e.g. the
    /// regularized Gram matrix failed to factor). Samplers treat this as a
    /// log density of negative infinity.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("empty store: {0}")]
    EmptyStore(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 1 for validation problems with the
    /// supplied inputs, 2 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 2,
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 2,
            _ => 1,
        }
    }
}
