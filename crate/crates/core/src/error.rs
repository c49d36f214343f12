use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("labels contain a single class; both classes are required")]
    SingleClass,

    #[error("dataset has no privileged columns")]
    MissingPrivileged,

    #[error("constraints are infeasible (equality residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("quadratic term is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotConvex { min_eigenvalue: f64 },

    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("least-squares basis is rank deficient after ridge regularization")]
    RankDeficient,

    #[error("bias interval is empty: lower {lower:e} > upper {upper:e}")]
    EmptyBiasInterval { lower: f64, upper: f64 },

    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every configuration in the search space failed")]
    AllConfigsFailed,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical machinery rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Infeasible { .. }
            | Error::NotConvex { .. }
            | Error::NotConverged { .. }
            | Error::RankDeficient
            | Error::EmptyBiasInterval { .. } => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
