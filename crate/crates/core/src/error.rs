use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid material law: {0}")]
    InvalidMaterial(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("stiffness matrix is singular or indefinite at equation {equation} (pivot {pivot:e})")]
    SingularSystem { equation: usize, pivot: f64 },

    #[error("unknown field kind `{0}`")]
    UnknownFieldKind(String),

    #[error("optimality-criteria bisection cannot reach volume {target} (best {achieved})")]
    BracketFailure { target: f64, achieved: f64 },

    #[error("non-finite compliance at iteration {iter}: {detail}")]
    NonFiniteCompliance { iter: usize, detail: String },

    #[error("degenerate growth curve: {0}")]
    DegenerateCurve(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    #[error("target unreachable: {0}")]
    Unreachable(String),

    #[error("stalled convergence after {iterations} iterations (1/c residual {residual:e})")]
    StalledConvergence { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("resize error: {0}")]
    Resize(String),

    #[error("archive error in {path}: {reason}")]
    Archive { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
