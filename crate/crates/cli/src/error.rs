use thiserror::Error;

use vlhardy_core::Error as CoreError;

/// Exit code of a passing run.
pub const EXIT_PASS: i32 = 0;
/// A theorem-consistency check failed.
pub const EXIT_FAIL: i32 = 1;
/// Bad command line or configuration.
pub const EXIT_USAGE: i32 = 2;
/// A numerical routine did not converge.
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(CoreError),

    #[error("check failed: {0}")]
    Check(CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Config(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NONCONVERGENCE,
            CliError::Check(_) => EXIT_FAIL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::CheckFailure { .. } => CliError::Check(e),
            CoreError::Invalid(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}
