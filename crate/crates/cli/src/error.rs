use thiserror::Error;

/// Everything that ends a run before a result exists; all map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}:{column}: {message}")]
    Spec { path: String, line: usize, column: usize, message: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] gibbslab::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}
