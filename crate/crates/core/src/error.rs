use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variable index {index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("{0} node needs at least one argument")]
    EmptyNode(&'static str),

    #[error("direction must be nonzero")]
    ZeroDirection,

    /// No point of the domain lies on the open ray `x + t d, t > 0`.
    #[error("epiderivative undefined along ray: no admissible step t > 0")]
    UndefinedAlongRay,

    /// The sampled difference quotients fell below the divergence floor.
    #[error("not epidifferentiable (numeric): quotient {quotient:e} at t = {t:e}")]
    NotEpidifferentiable { t: f64, quotient: f64 },

    #[error("point is not feasible: {0}")]
    Infeasible(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty direction set")]
    EmptyDirectionSet,

    /// No strictly better feasible point was found along a descent ray.
    #[error("no strictly better feasible point along the ray")]
    NoImprovement,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    /// A solver reached a state its contract rules out.
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
