//! CLI failure type carrying the process exit contract: configuration
//! problems exit 2, solver/integration failures exit 3, I/O problems 1.

use std::fmt;
use std::path::Path;

use crate::config::ConfigError;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Solver(omegagait::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(ConfigError::new(message))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid configuration: {e}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<omegagait::Error> for CliError {
    // Runtime breakdowns of the force balance (directly or mid-integration)
    // are solver failures; everything else the library rejects is a bad
    // experiment setup.
    fn from(e: omegagait::Error) -> Self {
        use omegagait::Error::*;
        match e {
            SolverDiverged { .. } | DegenerateAxis { .. } | AtStep { .. } => CliError::Solver(e),
            other => CliError::Config(ConfigError::new(other.to_string())),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Prefix a config error with the file it came from (`path:line: message`).
pub fn with_path(e: ConfigError, path: &Path) -> ConfigError {
    let message = if e.line > 0 {
        format!("{}:{}: {}", path.display(), e.line, e.message)
    } else {
        format!("{}: {}", path.display(), e.message)
    };
    ConfigError { line: 0, message }
}
