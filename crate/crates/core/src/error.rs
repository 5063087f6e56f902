use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch at {location}: expected {expected}, found {found}")]
    DimensionMismatch {
        location: String,
        expected: usize,
        found: usize,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("session {0} has no complete therapist-to-client exchange")]
    EmptySession(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure in window ({session_id}, t={t}, w={w}): {message}")]
    Numerical {
        session_id: String,
        t: usize,
        w: usize,
        message: String,
    },

    #[error("{0} did not converge")]
    Convergence(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("cannot split {clients} clients into {folds} folds")]
    InfeasibleSplit { clients: usize, folds: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("state became non-finite at step {t}")]
    Generation { t: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input data rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
