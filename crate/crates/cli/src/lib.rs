//! Command-line workflows around `rte-core`: CSV ingestion, TOML
//! configuration, fitting, bootstrap testing, prediction and simulation,
//! each run leaving a manifest that reproduces it.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;

pub use args::{Cli, Command};
pub use config::AnalysisConfig;
pub use error::{CliError, Result};

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<Vec<std::path::PathBuf>> {
    Ok(match &cli.command {
        Command::Fit(a) => commands::cmd_fit(&a.resolve()?)?.outputs,
        Command::Test(a) => commands::cmd_test(&a.resolve()?)?.outputs,
        Command::Predict(a) => commands::cmd_predict(&a.resolve()?)?.outputs,
        Command::Simulate(a) => commands::cmd_simulate(&a.resolve()?)?.outputs,
    })
}
