use std::fmt;
use std::path::PathBuf;

/// Where inside an experiment a failure happened.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Location {
    pub approach: Option<u8>,
    pub imputations: Option<usize>,
    pub replicate: Option<usize>,
    pub repetition: Option<usize>,
    pub fold: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(a) = self.approach {
            parts.push(format!("approach={a}"));
        }
        if let Some(k) = self.imputations {
            parts.push(format!("K={k}"));
        }
        if let Some(r) = self.replicate {
            parts.push(format!("replicate={r}"));
        }
        if let Some(k) = self.repetition {
            parts.push(format!("k={k}"));
        }
        if let Some(l) = self.fold {
            parts.push(format!("fold={l}"));
        }
        write!(f, "{}", parts.join(", "))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("outcome has a single class and ridge fallback is disabled")]
    SingleClass,

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Display includes the inner error.
    #[error("[{location}] {inner}")]
    Located { location: Location, inner: Box<Error> },
}

impl Error {
    /// Attaches experiment coordinates, merging into an existing location.
    pub fn locate(self, update: impl FnOnce(&mut Location)) -> Self {
        match self {
            Error::Located { mut location, inner } => {
                update(&mut location);
                Error::Located { location, inner }
            }
            other => {
                let mut location = Location::default();
                update(&mut location);
                Error::Located {
                    location,
                    inner: Box::new(other),
                }
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, error: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            error,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
