//! Error type shared across the crate.
//!
//! Operations refuse rather than truncate: anything that would exceed an
//! enumeration cap or a work budget reports an error instead of returning a
//! partial answer.

use thiserror::Error;

/// Errors produced by model generation, graph enumeration, and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Matrix or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A combinatorial enumeration would exceed its hard cap.
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    /// A lazy expansion or map enumeration would exceed its work budget.
    #[error("work budget exceeded: {0}")]
    BudgetExceeded(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Malformed on-disk data (matrix files, graph files, configs).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
