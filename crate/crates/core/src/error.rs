//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a mathematical precondition (out of range,
    /// non-unit vector, non-positive physical quantity, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run configuration is internally inconsistent or inadmissible.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure produced an invalid result (negative-weight
    /// overrun, failed fit, empty accumulator, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Self-consistent iteration stalled before reaching its residual target.
    #[error("SCF did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    /// A checkpoint could not be written, read, or matched to its manifest.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
