use std::fmt;

use thiserror::Error;

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<ParamViolation>),
    #[error("belief {0} is outside [0, 1]")]
    InvalidBelief(f64),
    #[error("expert signal volatility `gamma` is required for this computation")]
    MissingGamma,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
    #[error("invalid two-period config: {0}")]
    InvalidTwoPeriodConfig(String),
    #[error("solver did not converge after {iterations} iterations (last change {last_change:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        last_change: f64,
        residual: f64,
    },
}

impl ModelError {
    /// Field names of every violated parameter invariant, empty for other variants.
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            ModelError::InvalidParams(v) => v.iter().map(|v| v.field).collect(),
            _ => Vec::new(),
        }
    }
}

fn join(violations: &[ParamViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
