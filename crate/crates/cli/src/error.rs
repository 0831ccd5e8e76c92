use dppc_core::DppError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config does not match the schema:\n{0}")]
    Schema(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("expression `{expr}`: {msg}")]
    Expression { expr: String, msg: String },
    #[error(transparent)]
    Numeric(#[from] DppError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status: 2 for bad input, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Config(_) | CliError::Expression { .. } | CliError::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
