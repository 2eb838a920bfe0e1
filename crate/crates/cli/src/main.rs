//! Command-line front end for the robust bandit library.
//!
//! Exit status: 0 when every requested check passed, 1 when a check failed,
//! 2 on invalid input or any other error.

mod commands;
mod output;
mod params;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CutoffArgs, SimulateArgs, SweepArgs, TwoPeriodArgs, ValueArgs, VerifyArgs};
use output::{Format, OutputArgs};

#[derive(Debug, Parser)]
#[command(
    name = "robust-bandit",
    version,
    about = "Robust two-armed bandit experimentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form cutoffs and constants.
    Cutoff(CutoffArgs),
    /// Value functions (and expert surplus) on a belief grid.
    Value(ValueArgs),
    /// Cutoffs across a range of one parameter.
    Sweep(SweepArgs),
    /// Finite-difference HJB solve checked against the closed forms.
    Verify(VerifyArgs),
    /// Monte-Carlo simulation of the equilibrium belief process.
    Simulate(SimulateArgs),
    /// Brute-force two-period game.
    TwoPeriod(TwoPeriodArgs),
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let (report, default) = match &cli.command {
        Command::Cutoff(a) => (commands::cutoff(a)?, Format::Json),
        Command::Value(a) => (commands::value(a)?, Format::Csv),
        Command::Sweep(a) => (commands::sweep(a)?, Format::Csv),
        Command::Verify(a) => (commands::verify(a)?, Format::Json),
        Command::Simulate(a) => (commands::simulate(a)?, Format::Json),
        Command::TwoPeriod(a) => (commands::two_period(a)?, Format::Json),
    };
    report.emit(&cli.output, default)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more checks failed (see manifest `checks`)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
