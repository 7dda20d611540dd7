use serde::Serialize;
use thiserror::Error;

/// Exit code for a violated precondition (bad config, non-exact form, ...).
pub const EXIT_PRECONDITION: i32 = 2;
/// Exit code for numerical non-convergence.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] surfdyn::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_PRECONDITION,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.code(),
        }
    }

    pub fn diagnostic(&self) -> Diagnostic {
        Diagnostic {
            schema_version: crate::config::SCHEMA_VERSION,
            code: self.code().to_string(),
            message: self.to_string(),
            numerical: self.exit_code() == EXIT_NUMERICAL,
            exit_code: self.exit_code(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Machine-readable failure record written to `error.json`.
#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub schema_version: u32,
    pub code: String,
    pub message: String,
    pub numerical: bool,
    pub exit_code: i32,
}
