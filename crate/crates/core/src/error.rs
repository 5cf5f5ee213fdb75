use std::path::PathBuf;

/// Errors surfaced by dataset ingestion, model fitting, and the test suite.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A required column is missing or the schema is inconsistent.
    #[error("schema error: {0}")]
    Schema(String),

    /// A data row failed to parse or violated a field invariant.
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    /// Inputs violated an operation precondition.
    #[error("{0}")]
    Invalid(String),

    /// The penalized-likelihood Hessian could not be factorized.
    #[error("singular hessian; collinear columns: {}", .0.join(", "))]
    SingularHessian(Vec<String>),

    /// An iterative routine (not the fitter; see `FrailtyFit::converged`)
    /// exhausted its budget, e.g. censoring-rate calibration.
    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
