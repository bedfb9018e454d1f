//! `follicle`: experiments on the follicle maturation control model.
//!
//! Exit codes: 0 ok, 1 a verification failed, 2 bad input.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::Status;
use config::ExperimentConfig;
use output::Output;

#[derive(Parser)]
#[command(name = "follicle", version, about = "Bang-bang control experiments for follicle maturation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectories and the maturity moment under a fixed control.
    Simulate(Common),
    /// Cost against switching time, refined optimum and sanity families.
    Sweep(Common),
    /// Maximum-principle certificate of a bang-bang control.
    Verify(Common),
    /// Dirac-limit and mollifier convergence studies.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Sweep grid size.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Seed of the falsification run.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

type CommandFn = fn(&ExperimentConfig, &mut Output) -> Result<Status>;

fn run(cli: Cli) -> Result<Status> {
    let (name, common, cmd): (&str, Common, CommandFn) =
        match cli.command {
            Command::Simulate(c) => ("simulate", c, commands::simulate_cmd),
            Command::Sweep(c) => ("sweep", c, commands::sweep_cmd),
            Command::Verify(c) => ("verify", c, commands::verify_cmd),
            Command::Converge(c) => ("converge", c, commands::converge_cmd),
        };
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .context("cannot configure worker threads")?;
    }
    let cfg = ExperimentConfig::load(&common.config)?
        .with_grid(common.grid)?
        .with_seed(common.seed);
    let mut out = Output::create(&common.out, name, &cfg.hash)?;
    let status = cmd(&cfg, &mut out)?;
    for path in &out.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(status)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
