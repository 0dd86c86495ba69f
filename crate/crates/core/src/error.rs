//! Error type shared by every module.

use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failures reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// Human readable reason.
        reason: String,
    },
    /// Two objects disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Expected dimension.
        expected: usize,
        /// Dimension found.
        got: usize,
    },
    /// A computation produced NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// An iterate left the admissible region.
    #[error("iterate diverged at step {step}: norm {norm:e}")]
    Diverged {
        /// Step index at which the guard fired.
        step: u64,
        /// Norm of the offending iterate.
        norm: f64,
    },
    /// The forward event stream ended before the consumer was done.
    #[error("forward stream exhausted after {consumed} events ({completed} sampler streams completed)")]
    ForwardExhausted {
        /// Events consumed so far.
        consumed: u64,
        /// Sampler streams completed before exhaustion.
        completed: usize,
    },
    /// An input collection was empty.
    #[error("empty input: {0}")]
    Empty(&'static str),
    /// Two grids are not identical.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    /// A precondition of the requested computation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A quantity overflows `f64`.
    #[error("overflow in {what}: natural log of the value is {log_value:e}")]
    Overflow {
        /// Quantity that overflowed.
        what: &'static str,
        /// Natural logarithm of the value.
        log_value: f64,
    },
    /// A linear system has no unique solution.
    #[error("singular linear system")]
    Singular,
    /// The forward learner kept drawing initial points below the gradient threshold.
    #[error("re-initialization did not find a point with gradient norm above threshold after {0} draws")]
    ReinitStalled(u64),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn precondition(reason: impl Into<String>) -> Self {
        Error::Precondition(reason.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
