use thiserror::Error;

/// Errors raised by the numerical pipelines.
///
/// Every variant maps to a stable, machine-readable [`Error::category`]
/// string that front ends can surface verbatim.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix is not invertible: |det| = {det:e} below tolerance {tolerance:e}")]
    MatrixNotInvertible { det: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported dimension d = {dim}: {what} requires d = 2")]
    UnsupportedDimension { dim: usize, what: &'static str },

    #[error("row {row} of the transition matrix is not stochastic (sum = {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("transition matrix entry ({row}, {col}) = {value} is not strictly positive")]
    FullShiftViolation { row: usize, col: usize, value: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence {
        what: &'static str,
        iterations: usize,
        /// Last few ratios / residuals observed before giving up.
        trace: Vec<f64>,
    },

    #[error("symbol {symbol} out of range for k = {k}")]
    IndexOutOfRange { symbol: usize, k: usize },

    #[error("enumeration of {words} words exceeds the budget of {budget}")]
    BudgetExceeded { words: u128, budget: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::MatrixNotInvertible { .. } => "matrix-not-invertible",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::UnsupportedDimension { .. } => "unsupported-dimension",
            Error::NotStochastic { .. } => "not-stochastic",
            Error::FullShiftViolation { .. } => "full-shift-violation",
            Error::Convergence { .. } => "convergence-failure",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }

    /// True for errors caused by the numerics rather than by bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
