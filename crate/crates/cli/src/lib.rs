//! Experiment driver behind the `lik` binary.
//!
//! Each subcommand is a plain function over parsed arguments so that tests can
//! drive the pipeline without spawning a process.

pub mod commands;
pub mod config;
pub mod models;

use std::fmt;

use lik_core::ErrorClass;

/// Failure of a subcommand, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed files (exit 1).
    Usage(String),
    /// Error raised by the library (exit 1 or 2 by class).
    Core(lik_core::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Algorithmic => 2,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lik_core::Error> for CliError {
    fn from(e: lik_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(lik_core::Error::Io(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;
