use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SingularDesign(_) => "singular-design",
            Error::Budget(_) => "budget",
            Error::Domain(_) => "domain",
            Error::Invariant(_) => "invariant",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Whether the failure is attributable to the caller's arguments or
    /// limits rather than to a numerical or internal problem.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_) | Error::InvalidArgument(_) | Error::Domain(_) | Error::Budget(_)
        )
    }
}
