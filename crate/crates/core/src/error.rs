use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("search space too large: {product} strategy profiles exceeds the cap of {cap}")]
    TooLarge { product: u128, cap: u128 },

    #[error("composition error: {0}")]
    Composition(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rank-deficient design: column(s) {} are collinear with earlier columns", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
