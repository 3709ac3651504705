use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ltpoisson_core::Error),

    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if !e.category().is_input_error() => 3,
            CliError::Core(_) | CliError::Csv { .. } | CliError::Input(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.category().as_str(),
            CliError::Csv { .. } => "parse",
            CliError::Input(_) => "mismatch",
            CliError::Threshold(_) => "threshold",
        }
    }

    pub fn csv(path: &std::path::Path, source: csv::Error) -> Self {
        CliError::Csv { path: path.display().to_string(), source }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}
