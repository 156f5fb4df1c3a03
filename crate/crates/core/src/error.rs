use thiserror::Error;

/// Errors surfaced by the library. Registration and fault gating report
/// failure through result states instead; these are contract violations
/// and numerical dead ends.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerically degenerate: {0}")]
    NumericDegenerate(String),

    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    #[error("no correspondences within cutoff")]
    EmptyCorrespondence,

    #[error("rendezvous solver failed (best residual {best_residual:e})")]
    SolverFailure { best_residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
