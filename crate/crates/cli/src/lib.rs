//! Command-line driver for `gmc`: dataset export, training, encoding and
//! evaluation, with the file formats each step reads and writes.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pca;

pub use cli::Cli;
pub use error::{CliError, Result};

/// Sizes the global worker pool from a `--threads` / `GMC_THREADS` value.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(text) = value else {
        return Ok(());
    };
    let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::config(
            "GMC_THREADS",
            format!("expected a positive integer, got `{text}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("GMC_THREADS", e.to_string()))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<String> {
    configure_threads(cli.threads.as_deref())?;
    commands::run(&cli.command)
}
