use thiserror::Error;

use crate::exprlang::ParseError;
use crate::jets::DomainError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("derivative nesting deeper than {max} levels")]
    NestingTooDeep { max: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("2-inner product axiom violated: g(u,u/v) = {value}")]
    AxiomViolation { value: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate Jacobian (det = {det:e}) at {point:?}")]
    DegenerateJacobian { det: f64, point: Vec<f64> },

    #[error("supplied inverse is off by {residual:e} at {point:?}")]
    BadInverse { residual: f64, point: Vec<f64> },

    #[error("G must be positive, found {value} at {point:?}")]
    NonPositiveG { value: f64, point: Vec<f64> },

    #[error("lambda must be positive, found {value} at {point:?}")]
    NonPositiveLambda { value: f64, point: Vec<f64> },

    #[error("G matrix is singular at {point:?}")]
    SingularGMatrix { point: Vec<f64> },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
