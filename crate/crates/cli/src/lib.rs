//! Command implementations behind the `compdyn` binary.
//!
//! Every command returns its standard output together with an exit code, so
//! the binary only prints and exits. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | invalid config, flags or arguments |
//! | 3 | internal audit violation (the report is still printed) |
//! | 4 | no verified hyperbolic splitting (`shadow`) |

pub mod canonical;
pub mod commands;
pub mod config;

use compdyn::simulate::SimulateError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_NO_SPLITTING: i32 = 4;

pub const TOOL: &str = "compdyn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NoSplitting(String),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_INVALID,
            CliError::NoSplitting(_) | CliError::Simulate(SimulateError::NoSplitting(_)) => {
                EXIT_NO_SPLITTING
            }
            CliError::Simulate(SimulateError::Residual(_)) => EXIT_VIOLATION,
            CliError::Simulate(_) => EXIT_INVALID,
        }
    }
}

/// What a command prints and how the process should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    /// A one-line diagnostic for standard error.
    pub stderr: Option<String>,
    pub code: i32,
}

impl Outcome {
    pub fn ok(stdout: String) -> Self {
        Self {
            stdout,
            stderr: None,
            code: EXIT_OK,
        }
    }
}
