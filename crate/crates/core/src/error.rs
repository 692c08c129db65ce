use thiserror::Error;

use crate::design::DesignError;
use crate::family::FamilyError;

/// Failures raised by the fitting routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Family(#[from] FamilyError),

    #[error(transparent)]
    Design(#[from] DesignError),

    #[error("invalid penalty on column {column}: {reason}")]
    InvalidPenalty { column: usize, reason: String },

    #[error("invalid controls: {0}")]
    InvalidControls(String),

    #[error("non-finite derivative on column {column}")]
    NonFiniteDerivative { column: usize },

    #[error("cross-validation: {0}")]
    CrossValidation(String),

    #[error("{0}")]
    Argument(String),
}
