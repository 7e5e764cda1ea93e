use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn stage(stage: &'static str, message: impl std::fmt::Display) -> Self {
        CliError::Stage { stage, message: message.to_string() }
    }

    /// Process exit code: 2 for configuration problems, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}
