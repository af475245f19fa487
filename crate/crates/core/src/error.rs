use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("layout mismatch: {left:?} vs {right:?}")]
    LayoutMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("hamiltonian is not hermitian (relative defect {0:.3e})")]
    NotHermitian(f64),

    #[error("liouvillian kernel is degenerate (dimension {dimension})")]
    DegenerateKernel { dimension: usize },

    #[error("no stationary state within tolerance (residual {residual:.3e})")]
    NoStationaryState { residual: f64 },

    #[error("eigenvalue decomposition did not converge")]
    EigenFailure,

    #[error("resolvent is singular at omega = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("vanishing expectation value: {0}")]
    ZeroPopulation(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("frequency grid too narrow: {0}")]
    GridTooNarrow(String),

    #[error("malformed quantum numbers: {0}")]
    QuantumNumbers(String),

    #[error("closed form not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}
