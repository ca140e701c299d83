//! `fliu` command-line driver.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 bad usage or options,
//! 3 unreadable or inconsistent input data, 4 numerical failure (singular
//! system, saturated smoother, failed tuning, ...).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{merge, Cli, Command};

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use fliu_core::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<DataError>().is_some() {
        return 3;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidParam(_) | E::InvalidSplit(_) | E::InvalidBasis(_) | E::BasisKind { .. }) => 2,
        Some(E::TuningFailed(_)) => 4,
        Some(e) if e.is_numerical() => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit(a) => commands::fit(&merge(&a, a.config.as_deref())?),
        Command::Tune(a) => commands::tune(&merge(&a, a.config.as_deref())?),
        Command::Risk(a) => commands::risk(&merge(&a, a.config.as_deref())?),
        Command::Degeneracy(a) => commands::degeneracy(&merge(&a, a.config.as_deref())?),
        Command::Simulate(a) => commands::simulate(&merge(&a, a.config.as_deref())?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
