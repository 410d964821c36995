//! `airtoll` command line: runs attribution, health valuation, load balancing
//! and signal statistics from a scenario file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod failure;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use airtoll::scheduler::CarbonPrice;

use crate::failure::{classify, Failure};
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "airtoll", version, about = "Public-health cost accounting for data-center air pollution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scope 1/2/3 emissions per source region.
    Attribute(Common),
    /// Dispersion, incidence and monetized health cost.
    Health(Common),
    /// Baseline, carbon-aware and health-informed load balancing.
    Glb(Common),
    /// Spread and correlation statistics of grid signals.
    Stats(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Capacity slackness for load balancing (>= 1).
    #[arg(long)]
    lambda: Option<f64>,
    /// Carbon price in USD/ton, or `inf`.
    #[arg(long)]
    carbon_price: Option<String>,
    /// Annual discount rate for lagged mortality.
    #[arg(long)]
    discount_rate: Option<f64>,
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Attribute(c) | Command::Health(c) | Command::Glb(c) | Command::Stats(c)) = &cli.command;
    if let Some(l) = c.lambda {
        if !(l >= 1.0) || !l.is_finite() {
            return Err(Failure::validation(format!("--lambda must be >= 1, got {l}")).into());
        }
    }
    if let Some(r) = c.discount_rate {
        if !(r > -1.0) || !r.is_finite() {
            return Err(Failure::validation(format!("--discount-rate must exceed -1, got {r}")).into());
        }
    }
    let carbon = c
        .carbon_price
        .as_deref()
        .map(|s| s.parse::<CarbonPrice>())
        .transpose()
        .map_err(|e| Failure::validation(format!("--carbon-price: {e}")))?;

    let scn = Scenario::load(&c.scenario)?;
    let outputs = match &cli.command {
        Command::Attribute(_) => commands::attribute::run(&scn)?,
        Command::Health(_) => commands::health::run(&scn, c.discount_rate)?,
        Command::Glb(_) => commands::glb::run(&scn, c.lambda, carbon)?,
        Command::Stats(_) => commands::stats::run(&scn)?,
    };
    let dir = scn.output_dir(c.output_dir.as_deref());
    for path in outputs.write_all(&dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err).exit_code())
        }
    }
}
