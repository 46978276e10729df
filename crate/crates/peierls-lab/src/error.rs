use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("configuration outside the functional domain: {0}")]
    OutsideDomain(String),
    #[error("unsupported derivative order {0} (max 3)")]
    UnsupportedOrder(usize),
    #[error("functional is not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("functional carries a complex scalar; use the complex evaluators")]
    ComplexValued,
    #[error("CFL violation at node ({it}, {ix}): ratio {ratio:.6} > 1")]
    Cfl { it: usize, ix: usize, ratio: f64 },
    #[error("operator not normally hyperbolic at node ({it}, {ix})")]
    NotHyperbolic { it: usize, ix: usize },
    #[error("functional is not additive (worst residual {0:.3e})")]
    NotAdditive(f64),
    #[error("support violates the temporal boundary margin: {0}")]
    Margin(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
