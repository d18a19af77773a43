use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, lengths or layouts that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input outside the domain of a numerical routine (e.g. a non-Hurwitz
    /// matrix handed to a Lyapunov solve).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {message}")]
    Solver { message: String, dump: String },

    /// Eigenvalue derivatives do not exist or are numerically meaningless
    /// (repeated eigenvalue, ill-conditioned eigenbasis).
    #[error("eigenvalue derivative unavailable: {0}")]
    DerivativeUnavailable(String),

    #[error("gain recovery failed after {attempts} attempts")]
    RecoverFailed { attempts: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
