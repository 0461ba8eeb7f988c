//! Figure-reproduction workflows on top of `lambda-raman`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod manifest;
pub mod output;

pub use commands::{OptimizeArgs, RobustnessArgs, SimulateArgs, SweepArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lambda-raman",
    version,
    about = "Optimal polychromatic Raman driving of a Lambda system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal pulse of a given constraint order.
    Optimize(OptimizeArgs),
    /// Propagate a pulse and write population traces and window fidelities.
    Simulate(SimulateArgs),
    /// Predicted fluctuation of the optimal pulse versus harmonic count.
    SweepN(SweepArgs),
    /// Trial-averaged window fidelities under random amplitude errors.
    Robustness(RobustnessArgs),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match &cli.command {
        Command::Optimize(a) => commands::optimize(a, &recorded),
        Command::Simulate(a) => commands::simulate(a, &recorded),
        Command::SweepN(a) => commands::sweep_n(a, &recorded),
        Command::Robustness(a) => commands::robustness(a, &recorded),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
