use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use subdiff_cli::config::ConfigError;
use subdiff_cli::error::EXIT_CONFIG;
use subdiff_cli::{parse_config, run_command, CliError, Command};

/// Experiments for semilinear equations with memory kernels.
#[derive(Debug, Parser)]
#[command(name = "subdiff", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Config file in `key = value` format; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (a directory for `verify`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = (|| -> Result<u8, CliError> {
        let text = match &args.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Incompatible(format!("cannot read {}: {e}", path.display())))?,
            None => String::new(),
        };
        let cfg = parse_config(&text, args.command)?;
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        let code = run_command(&cfg, args.out.as_deref(), &mut lock)?;
        lock.flush()?;
        Ok(code)
    })();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
