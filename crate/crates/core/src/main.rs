use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aloe_lab::runner::{run, RunOverrides};

/// Run a Monte-Carlo experiment of the adaptive line search and compare it
/// with its complexity bounds.
#[derive(Debug, Parser)]
#[command(name = "aloe-lab", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress the summary table.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = RunOverrides {
        seed: cli.seed,
        trials: cli.trials,
        jobs: cli.jobs,
        quiet: cli.quiet,
    };
    let code = run(&cli.config, &cli.out, &ov);
    ExitCode::from(code as u8)
}
