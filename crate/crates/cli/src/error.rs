use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config ({field}): {message}")]
    InvalidConfig { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] bvfrac::Error),
}

impl CliError {
    /// Process exit code: every error is an invalid run.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
