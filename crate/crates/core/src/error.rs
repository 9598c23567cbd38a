use std::fmt;

use thiserror::Error;

use crate::estimator::SigmaOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Gram matrix of the Toeplitz slice with columns `start..end` is
    /// rank deficient or numerically singular.
    #[error("singular system for Toeplitz slice columns {start}..{end} (rcond = {rcond:.3e})")]
    Singular { start: usize, end: usize, rcond: f64 },

    #[error("no feasible model: every noise variance was rejected\n{}", RejectionReport(.0))]
    NoFeasibleModel(Vec<SigmaOutcome>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

struct RejectionReport<'a>(&'a [SigmaOutcome]);

impl fmt::Display for RejectionReport<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for outcome in self.0 {
            writeln!(f, "  {outcome}")?;
        }
        Ok(())
    }
}
