mod args;
mod commands;
mod input;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Exit code 2: bad flags, unreadable or invalid input.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { msg: msg.into() }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Self::usage(format!("write failed: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => commands::cmd_analyze(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::Sweep(a) => commands::cmd_sweep(a),
        Command::Validate(a) => commands::cmd_validate(a),
        Command::Report(a) => commands::cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
