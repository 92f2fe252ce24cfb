use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An action kind outside the allowed set for the current state.
    #[error("quota violation: {0}")]
    QuotaViolation(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("retriever error: {0}")]
    Retriever(String),
    #[error("corpus error: {0}")]
    Corpus(String),
    /// A caller broke a documented precondition.
    #[error("contract error: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable class used by the command-line error records.
    pub fn class(&self) -> &'static str {
        match self {
            Error::QuotaViolation(_) => "quota",
            Error::Invariant(_) => "invariant",
            Error::Retriever(_) => "retriever",
            Error::Corpus(_) => "corpus",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Generation(_) => "generation",
            Error::Numeric(_) => "numeric",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
