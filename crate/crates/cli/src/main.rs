use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use singlet_cli::{parse_config, run, Command, RunOptions};

/// Two-transmon singlet stabilization: dynamics, rates, spectra, tuning.
#[derive(Debug, Parser)]
#[command(name = "singlet", version)]
struct Args {
    /// evolve | steady | rates | benchmarks | spectrum | optimize | sweep
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps and restarts (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    svg: bool,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    cfg.command = args.command;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not size worker pool: {e}");
        }
    }
    match run(&cfg, &args.out, &RunOptions { svg: args.svg }) {
        Ok(a) => {
            if let Some(f) = &a.failure {
                eprintln!("numerical failure: {f} (partial results in {})", args.out.display());
            }
            ExitCode::from(a.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
