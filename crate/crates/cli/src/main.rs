use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use rte_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli).context("rte failed") {
        Ok(outputs) => {
            for p in outputs {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<CliError>()
                .map_or(CliError::EXIT_OTHER, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
