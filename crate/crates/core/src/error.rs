use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid ensemble specification: {0}")]
    InvalidSpec(String),
    #[error("numerical optimization failed: {0}")]
    Optimization(String),
    #[error("matrix is not positive definite: {0}")]
    SingularMatrix(String),
    #[error("Kullback-Leibler divergence is infinite: {0}")]
    InfiniteKl(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("exhaustive search budget exceeded: needs {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 configuration, 3 domain, 4 budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Json(_) => 2,
            Error::Domain(_)
            | Error::Dimension(_)
            | Error::Index(_)
            | Error::InvalidMatrix(_)
            | Error::InvalidSpec(_)
            | Error::SingularMatrix(_)
            | Error::InfiniteKl(_) => 3,
            Error::BudgetExceeded { .. } => 4,
            Error::Optimization(_) | Error::ConstructionFailed(_) | Error::Io(_) => 1,
        }
    }
}
