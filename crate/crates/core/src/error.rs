use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("term budget exceeded: {required} summands required but the budget is {budget} (raise it with PICM_BUDGET)")]
    Budget { required: String, budget: u64 },
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("key error: {0}")]
    Key(String),
    #[error("not an invariant jump function: {0}")]
    NotInvariant(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
