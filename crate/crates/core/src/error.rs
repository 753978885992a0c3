use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ping-pong certificate denied: {0}")]
    CertificateDenied(String),

    #[error("point outside the usable range: {0}")]
    Range(String),

    #[error("degenerate matrix: determinant {0:e} is too close to zero")]
    SingularMatrix(f64),

    #[error("determinant {0} deviates from 1 by more than the accepted tolerance")]
    Determinant(String),

    #[error("the identity has no isolated fixed points")]
    IdentityFixedPoints,

    #[error("group '{0}' is elementary")]
    Elementary(String),

    #[error("enumeration budget of {cap} exceeded")]
    BudgetExceeded { cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate point set: {0}")]
    Degenerate(String),

    #[error("bisection endpoints do not bracket the half level: {0}")]
    NonBracketing(String),

    #[error("invalid group file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
