mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::Settings;

/// Dead-core solutions of `Δ∞u = λ (u⁺)^γ` on a ball: solves, exact radial
/// profiles, free-boundary analysis, experiment suites and parameter sweeps.
#[derive(Parser, Debug)]
#[command(name = "deadcore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve on the ball of radius R with boundary level c, or the --problem file; writes field.csv and report.json.
    Solve,
    /// Exact radial solution; writes profile.csv and radial.json.
    Radial,
    /// Free-boundary geometry of a field CSV; writes free_boundary.json and sup_over_balls.csv.
    Fbanalyze,
    /// Run an experiment suite; writes verify.jsonl and echoes it to stdout.
    Verify,
    /// Vary lambda or gamma; writes sweep.csv and sweep.json.
    Sweep,
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0} experiment(s) failed")]
    Experiments(usize),
    #[error("{0}")]
    NotConverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Experiments(_) => 1,
            Failure::Config(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DEADCORE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Config(format!("DEADCORE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot start {n} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let config = cli.settings.resolve()?;
    match cli.command {
        Command::Solve => commands::solve(&config),
        Command::Radial => commands::radial(&config),
        Command::Fbanalyze => commands::fbanalyze(&config),
        Command::Verify => commands::verify(&config),
        Command::Sweep => commands::sweep(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deadcore: {e}");
            ExitCode::from(e.code())
        }
    }
}
