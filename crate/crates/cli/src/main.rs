//! `superres` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use clap::{CommandFactory, Parser};
use config::{Cli, Command};
use error::CliError;
use std::process::ExitCode;

fn load_config(path: &std::path::Path) -> Result<Command, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid configuration {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match (cli.config, cli.command) {
        (Some(path), None) => load_config(&path),
        (None, Some(c)) => Ok(c),
        _ => {
            let _ = Cli::command().print_help();
            return ExitCode::from(2);
        }
    };
    match command.and_then(|c| commands::run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.to_json()).expect("json values serialize"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
