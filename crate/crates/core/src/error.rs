use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped so that callers (notably the command-line front end)
/// can map them onto distinct exit classes: usage/size/index problems,
/// solver convergence, numerical health, I/O, and artifact compatibility.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("solver failed at (h1={h1}, h2={h2}): {source}")]
    AtGridPoint {
        h1: f64,
        h2: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical health: {0}")]
    NumericalHealth(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("undefined contrast: q_near + q_long = {0:e}")]
    UndefinedContrast(f64),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Strips grid-point context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
