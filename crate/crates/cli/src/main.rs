//! `ltpoisson`: solve, benchmark, compare and mesh generation.
//!
//! Exit codes: 0 success, 1 usage, 2 input error, 3 numerical failure or
//! exceeded comparison threshold.

mod benchmark;
mod compare;
mod error;
mod meshgen;
mod output;
mod solve;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ltpoisson", version, about = "Loop-tree Poisson solver for 2-D electrostatics")]
struct Cli {
    /// Cap on worker threads used during assembly.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem and write field.csv and report.toml.
    Solve(solve::SolveArgs),
    /// Time a problem family over mesh sizes and fit log-log slopes.
    Benchmark(benchmark::BenchmarkArgs),
    /// Compare two field files.
    Compare(compare::CompareArgs),
    /// Write a built-in mesh (and optionally its problem config).
    Meshgen(meshgen::MeshgenArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve(args) => solve::run(args),
        Command::Benchmark(args) => benchmark::run(args),
        Command::Compare(args) => compare::run(args),
        Command::Meshgen(args) => meshgen::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
