use std::io;

use thiserror::Error;

use crate::config::ConfigError;
use crate::csv_out::CsvError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] subdiff_core::Error),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    /// One line, `key=value` fields, for scripts consuming stderr.
    pub fn record(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Core(_) => "solver",
            CliError::Csv(_) => "output",
            CliError::Io(_) => "io",
        };
        format!("error kind={kind} message={:?}", self.to_string())
    }
}
