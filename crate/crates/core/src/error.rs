use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    Quadrature { estimate: f64, error_bound: f64 },

    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("mean of the skew-t error is undefined for nu = {nu} (requires nu > 1)")]
    MeanUndefined { nu: f64 },

    #[error("degenerate likelihood at observation {observation}")]
    DegenerateLikelihood { observation: usize },

    #[error("weighted Gram matrix of component {component} is singular")]
    Singular { component: usize },

    #[error("component {component} degenerated: {reason}")]
    Degenerate { component: usize, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("fit failed after {starts} starts: {last}")]
    FitFailure { starts: usize, last: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
