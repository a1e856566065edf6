use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("state is not normalized (norm deviation {0:.3e})")]
    Unnormalized(f64),

    #[error("non-finite amplitudes encountered at t = {0}")]
    NonFinite(f64),

    #[error("dimension {dim} exceeds the dense limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("krylov step failed to reach tolerance {tol:.1e} after {halvings} halvings of dt")]
    KrylovNoConvergence { tol: f64, halvings: u32 },

    #[error("state norm collapsed to {0:.3e}")]
    NormCollapse(f64),

    #[error("gauss law violated: {violation:.3e} at t = {time}")]
    GaussViolation { violation: f64, time: f64 },

    #[error("empty averaging window [{0}, {1}]")]
    EmptyWindow(f64, f64),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::EmptyWindow(..) => 1,
            Error::Verification(_) => 3,
            _ => 2,
        }
    }
}
