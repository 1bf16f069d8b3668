//! Crate-wide error type.
//!
//! Variants are grouped so front ends can map them onto a stable exit-code
//! contract: parse failures, resource-budget overruns, and everything that
//! amounts to a violated mathematical invariant.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input operator failed the Hermiticity check.
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    /// Matrix or vector dimensions do not line up for the requested operation.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    /// A subsystem label was not found in the layout.
    #[error("unknown system label `{label}` (layout has {available})")]
    UnknownSystem { label: String, available: String },

    /// An operator failed a density-operator invariant (trace or positivity).
    #[error("invalid density operator for {context}: {detail}")]
    InvalidDensity { context: String, detail: String },

    /// Kraus operators do not satisfy the completeness relation.
    #[error("Kraus set is not trace preserving: completeness residual {residual:.3e}")]
    IncompleteKraus { residual: f64 },

    /// A probability vector is negative or does not sum to one.
    #[error("invalid distribution in {context}: {detail}")]
    InvalidDistribution { context: String, detail: String },

    /// The requested computation exceeds the configured memory/enumeration budget.
    #[error("resource budget exceeded: need {required} units, budget is {budget} ({context})")]
    Budget {
        context: String,
        required: u128,
        budget: u128,
    },

    /// Malformed input document (channel spec JSON, resource-inequality text).
    #[error("parse error: {message}")]
    Parse { message: String },

    /// An internal cross-check between two computation routes disagreed.
    #[error("numerical consistency check failed in {context}: {detail}")]
    Inconsistent { context: String, detail: String },

    /// Caller passed an argument outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Error::Parse {
            message: message.into(),
        }
    }
}
