use thiserror::Error;

use crate::estimate::EstimateResult;

/// Which margin of a contingency table an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    Row,
    Column,
}

impl std::fmt::Display for Margin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Margin::Row => f.write_str("row"),
            Margin::Column => f.write_str("column"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("invalid parameter vector: {0}")]
    InvalidTheta(String),

    #[error("contingency table has no observations")]
    EmptyTable,

    #[error("{margin} category {index} has no observations (zero-based index)")]
    EmptyCategory { margin: Margin, index: usize },

    #[error("optimizer hit the iteration limit without converging")]
    NoConvergence(Box<EstimateResult>),

    #[error("variable is constant, correlation undefined")]
    DegenerateMargin,

    #[error("model probability of cell ({row}, {col}) is numerically zero")]
    NearZeroCell { row: usize, col: usize },

    #[error("sandwich matrix M is numerically singular (condition number {condition:.3e})")]
    SingularM { condition: f64 },

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
