//! Library side of the `setclr` command-line tool.

pub mod commands;
pub mod config;
pub mod report;

use setclr_core::Error;
use std::fmt;

/// Failures mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration; exit 2.
    Config(String),
    /// Non-finite values or numerical breakdown during a run; exit 3.
    Numeric(String),
    /// Anything else; exit 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn from_core(e: Error, context: &str) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            Error::Config { .. } => CliError::Config(msg),
            Error::NonFinite(_) | Error::Degenerate(_) | Error::Convergence { .. } => CliError::Numeric(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::from_core(e, "error")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
