use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("measures live on different spaces ({0} vs {1})")]
    SpaceMismatch(String, String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("quadrature did not converge: last estimate {last}, previous estimate {previous}")]
    NotConverged { last: f64, previous: f64 },

    #[error(
        "threshold decision is indeterminate: integral {integral} lies within {margin:e} of {threshold}; refine the quadrature"
    )]
    Indeterminate {
        integral: f64,
        threshold: f64,
        margin: f64,
    },

    #[error("enumeration needs {needed} states but the limit is {limit}")]
    TooLarge { needed: f64, limit: f64 },

    #[error("every mixture component gives the population zero probability")]
    ImpossiblePopulation,

    #[error("bisection bracket does not straddle a root: {0}")]
    Bracket(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
