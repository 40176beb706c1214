#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

use args::{Cli, Command, DemoCmd, WitnessCmd};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    UnknownSubcommand(String),
    #[error("{0}")]
    BadFlag(String),
    #[error("{0}")]
    Domain(#[from] heston_degen::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::UnknownSubcommand(_) => "UnknownSubcommand",
            CliError::BadFlag(_) => "BadFlag",
            CliError::Domain(e) => e.code(),
            CliError::Io(_) => "Io",
        }
    }

    fn exit(&self) -> u8 {
        match self {
            CliError::UnknownSubcommand(_) | CliError::BadFlag(_) => 2,
            _ => 1,
        }
    }
}

pub struct Progress {
    quiet: bool,
}

impl Progress {
    pub fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn first_line(s: &str) -> &str {
    s.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim_start_matches("error: ")
}

fn run(argv: impl IntoIterator<Item = OsString>) -> Result<serde_json::Value, CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                std::process::exit(0);
            }
            ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                return Err(CliError::UnknownSubcommand(first_line(&e.to_string()).to_string()))
            }
            _ => return Err(CliError::BadFlag(first_line(&e.to_string()).to_string())),
        },
    };
    let cfg = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = cfg.as_ref();
    let progress = Progress { quiet: cli.quiet };
    match cli.command {
        Command::Feller(a) => commands::feller(config::merge(&a, cfg)?),
        Command::Fichera(a) => commands::fichera(config::merge(&a, cfg)?),
        Command::Witness(WitnessCmd::Eval(a)) => commands::witness_eval(config::merge(&a, cfg)?),
        Command::Witness(WitnessCmd::Verify(a)) => commands::witness_verify(config::merge(&a, cfg)?),
        Command::Transform(a) => commands::transform(config::merge(&a, cfg)?, &progress),
        Command::Solve1d(a) => commands::solve1d(config::merge(&a, cfg)?, &progress),
        Command::Solve2d(a) => commands::solve2d(config::merge(&a, cfg)?, &progress),
        Command::Price(a) => commands::price(config::merge(&a, cfg)?),
        Command::Growth(a) => commands::growth(config::merge(&a, cfg)?),
        Command::Demo(DemoCmd::Nonuniqueness(a)) => commands::nonuniqueness(config::merge(&a, cfg)?, &progress),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(v) => {
            output::print_json(&v);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            ExitCode::from(e.exit())
        }
    }
}
