//! `coex`: run the frame-level solver, the averaged sweeps, the multiuser
//! assignment and the Monte Carlo validation from a TOML config.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 infeasible rate
//! (the message carries the achievable maximum), 3 validation failure.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use coex_core::sim::ExperimentMode;
use config::Config;
use output::Manifest;

#[derive(Parser)]
#[command(name = "coex", version, about = "Interference-aware power and time allocation next to ON/OFF ad-hoc links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame-level allocation for one sensing reading, swept over the rate targets.
    Frame(Common),
    /// Sensing-averaged allocation per channel realization, all three schemes.
    Average(Common),
    /// Allocation averaged over sensing and the channel distribution.
    RandomChannel(Common),
    /// Exhaustive and greedy sub-channel assignment for several users.
    Multiuser(Common),
    /// Analytic formulas against Monte Carlo simulation.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seeds.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Relative rate tolerance.
    #[arg(long = "eps-r")]
    eps_r: Option<f64>,
    /// Relative power tolerance.
    #[arg(long = "eps-p")]
    eps_p: Option<f64>,
    /// Overrides `simulation.samples` (random-channel draws).
    #[arg(long)]
    samples: Option<usize>,
    /// Overrides `simulation.trajectories`.
    #[arg(long)]
    trials: Option<usize>,
    /// Sensing reading per band for `frame`, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    sensing: Option<Vec<u8>>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut config = Config::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seeds.seed = seed;
        }
        if let Some(e) = self.eps_r {
            config.tolerances.eps_rate = e;
        }
        if let Some(e) = self.eps_p {
            config.tolerances.eps_power = e;
        }
        if let Some(s) = self.samples {
            config.simulation.samples = s;
        }
        if let Some(t) = self.trials {
            config.simulation.trajectories = t;
        }
        if let Some(y) = &self.sensing {
            config.frame.sensing = Some(y.clone());
        }
        config.check()?;
        Ok(config)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var("COEX_THREADS") {
        let n: usize = value.parse().with_context(|| format!("COEX_THREADS={value} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

enum Failure {
    Config(anyhow::Error),
    Infeasible(anyhow::Error),
    Validation(commands::ValidationFailed),
}

fn classify(e: anyhow::Error) -> Failure {
    match e.downcast_ref::<coex_core::Error>() {
        Some(coex_core::Error::Infeasible { .. }) => Failure::Infeasible(e),
        _ => Failure::Config(e),
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    configure_threads().map_err(Failure::Config)?;
    let (name, common) = match &cli.command {
        Command::Frame(c) => ("frame", c),
        Command::Average(c) => ("average", c),
        Command::RandomChannel(c) => ("random-channel", c),
        Command::Multiuser(c) => ("multiuser", c),
        Command::Validate(c) => ("validate", c),
    };
    let config = common.load().map_err(Failure::Config)?;
    let out: &Path = &common.out;
    let mut failed = None;
    let files = match &cli.command {
        Command::Frame(_) => commands::frame(&config, out),
        Command::Average(_) => commands::sweep(&config, out, ExperimentMode::Average),
        Command::RandomChannel(_) => commands::sweep(&config, out, ExperimentMode::RandomChannel),
        Command::Multiuser(_) => commands::multiuser(&config, out),
        Command::Validate(_) => commands::validate(&config, out).map(|(files, f)| {
            failed = f;
            files
        }),
    }
    .map_err(classify)?;
    Manifest::new(name, config.hash(), config.seeds.seed, files)
        .write(out)
        .map_err(Failure::Config)?;
    match failed {
        Some(f) => Err(Failure::Validation(f)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(f)) => {
            eprintln!("validation failed: {f}");
            ExitCode::from(3)
        }
    }
}
