//! Front end for `subdiff-core`: config parsing, experiment commands, CSV
//! output and the acceptance suite behind `subdiff verify`.

pub mod commands;
pub mod config;
pub mod csv_out;
pub mod error;
pub mod setup;
pub mod verify;

pub use commands::run_command;
pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use error::CliError;

use config::ConfigError as CfgErr;

/// Environment variable capping the worker threads used by scans and `verify`.
pub const THREADS_ENV: &str = "SUBDIFF_THREADS";

/// Thread pool for independent runs, sized by `SUBDIFF_THREADS` when set.
pub fn scan_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CfgErr::Incompatible(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}
