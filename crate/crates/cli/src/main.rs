//! `vohedge`: batch front-end of the variance-optimal hedging engine.
//!
//! ```text
//! vohedge <price|hedge|variance|backtest|payoff-check> --config run.cfg [--out DIR] [--seed N] [--threads N]
//! ```
//!
//! The configuration format is described in the README.

mod commands;
mod config;
mod output;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{RawConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "vohedge", version, about = "Variance-optimal hedging of claims on processes with independent increments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Backtest seed; overrides `backtest.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to VOHEDGE_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Initial capitals over the strike grid.
    Price,
    /// Initial hedge ratios over the strike grid.
    Hedge,
    /// Minimal quadratic hedging error.
    Variance,
    /// Monte-Carlo backtest of the hedging strategies.
    Backtest,
    /// Payoff reconstruction errors.
    PayoffCheck,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("VOHEDGE_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("VOHEDGE_THREADS = `{v}` is not a thread count"))?)),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot configure the thread pool")?;
    }
    let path = cli.config.context("--config <path> is required")?;
    let mut cfg = RunConfig::from_raw(&RawConfig::load(&path)?)?;
    if let Some(seed) = cli.seed {
        cfg.backtest.seed = seed;
    }
    let tables = match cli.command {
        Command::Price => commands::price(&cfg),
        Command::Hedge => commands::hedge(&cfg),
        Command::Variance => commands::variance(&cfg),
        Command::Backtest => commands::backtest(&cfg),
        Command::PayoffCheck => commands::payoff_check(&cfg),
    }?;
    let dir = cli.out.or(cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    for p in output::write_all(&dir, &tables)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
