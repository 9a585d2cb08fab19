//! Crate-wide error type.

use crate::minimize::MinimizeTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("wavenumber must be positive, got k = {0}")]
    NonPositiveWavenumber(f64),

    #[error("weight exponent must exceed 1 for the weighted estimate, got {0}")]
    LambdaHypothesis(f64),

    #[error("forward system ill-conditioned at k = {k}: condition estimate {cond:.3e}")]
    IllConditioned { k: f64, cond: f64 },

    #[error("boundary data degenerate: |g0| = {magnitude:.3e} at k = {k}")]
    DegenerateData { k: f64, magnitude: f64 },

    #[error("minimization diverged at iteration {iter}: {reason}")]
    Diverged {
        iter: usize,
        reason: String,
        /// Trace accumulated up to the failure, for post-mortem output.
        trace: Box<MinimizeTrace>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("data cover k in [{have_lo}, {have_hi}] but the grid requires [{need_lo}, {need_hi}]")]
    Coverage {
        have_lo: f64,
        have_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("post-processed profile has values on both sides of 1; contrast mode is ambiguous")]
    AmbiguousMode,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
