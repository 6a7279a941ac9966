use noisy_tunnel::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const VALIDATION: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io(_) => exit::USAGE,
            Self::Numerical(_) => exit::NUMERICAL,
            Self::Validation(_) => exit::VALIDATION,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::StepUnderflow { .. } | CoreError::StepBudgetExceeded { .. } => {
                Self::Numerical(e.to_string())
            }
            other => Self::Usage(other.to_string()),
        }
    }
}
