use thiserror::Error;

/// Failure while evaluating a vector field or one of its derivatives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} is undefined at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("bracket matrix is singular at {x:?} (condition estimate {cond:.3e})")]
    Singular { x: Vec<f64>, cond: f64 },
    #[error("invalid index sets: {0}")]
    IndexSets(String),
    #[error("invalid kappa assignment: {0}")]
    Kappa(String),
    #[error("no kappa assignment found below bound {bound}")]
    KappaExhausted { bound: i64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("trajectory too short: need at least {needed} sampling instants, found {found}")]
    TooShort { needed: usize, found: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
