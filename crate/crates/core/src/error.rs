use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("series did not converge after {terms} terms at t = {t}")]
    SeriesNotConverged { t: f64, terms: usize },

    #[error("series lost precision to cancellation at t = {t} (relative rounding bound {bound:e})")]
    SeriesCancellation { t: f64, bound: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::SeriesNotConverged { .. } | Error::SeriesCancellation { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
