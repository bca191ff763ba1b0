use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid information set: {0}")]
    InvalidData(String),

    #[error("information set is infeasible for the {0} class")]
    Infeasible(&'static str),

    #[error("price {0} is not a feasible optimal price for this information set")]
    NotCertified(f64),

    #[error("no certified optimal price on the search grid")]
    EmptyOptimalSet,

    #[error("linear program failed: {0}")]
    Numerical(String),
}

pub type Result<T, E = PricingError> = std::result::Result<T, E>;
