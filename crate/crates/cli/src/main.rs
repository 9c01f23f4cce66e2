//! `hpcfe`: train and query surrogates, run UQ benchmark studies and track a
//! degrading oscillator from multi-fidelity measurements.
//!
//! Data goes to files only; diagnostics go to stderr. Exit codes: 0 on
//! success, 1 on invalid input, 2 on numerical failure.

mod args;
mod error;
mod output;
mod plot;
mod surrogate;
mod twin;
mod uq;

use clap::Parser;

use args::{Cli, Command, TwinCommand, UqCommand};
use error::Result;

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => surrogate::fit(&a),
        Command::Predict(a) => surrogate::predict(&a),
        Command::Uq(UqCommand::Run(a)) => uq::run(&a),
        Command::Twin(TwinCommand::Simulate(a)) => twin::simulate(&a),
        Command::Twin(TwinCommand::Track(a)) => twin::track(&a),
        Command::PlotData(a) => plot::plot_data(&a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
