use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lattice generator is singular (|det| = {0:e})")]
    SingularGenerator(f64),

    #[error("lattice second moment has not been estimated")]
    SecondMomentUnset,

    /// Every device with a non-zero coefficient has zero update variance,
    /// so no normalizing factor exists for the round.
    #[error("degenerate round: a^T diag(sigma) a = 0")]
    DegenerateRound,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
