//! `meshcast`: analytic evaluations, network simulations and validation
//! reports for the P2P streaming overlay model.
//!
//! Exit codes: 0 success, 1 usage or execution error, 2 a `compare` check
//! failed.

mod analytic;
mod compare;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "meshcast", version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate closed forms, series and bounds.
    #[command(subcommand)]
    Analytic(analytic::AnalyticCmd),
    /// Run network replications and write traces plus a summary.
    Simulate(simulate::SimulateArgs),
    /// Run simulation-versus-analytic checks and report pass/fail.
    Compare(compare::CompareArgs),
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Exec(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Analytic(cmd) => analytic::run(cmd).map(|_| true),
        Command::Simulate(args) => simulate::run(args, cli.jobs).map(|_| true),
        Command::Compare(args) => compare::run(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Exec(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
