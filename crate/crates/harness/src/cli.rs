//! Command-line interface. `main` builds the thread pool, calls [`run`] and
//! prints the reply.

use crate::commands::{self, MetricsInput, RunManifest};
use crate::config::{ExperimentConfig, Overrides};
use crate::experiments;
use crate::io::{to_json_string, Format, OutputDir};
use crate::setup::Setup;
use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

/// Passive-SGLD inverse reinforcement learning experiments.
#[derive(Parser)]
#[command(name = "psgld-irl", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Experiment config (TOML). Defaults to a 1-D quadratic cost.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "PSGLD_IRL_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the forward learner and write its gradient events.
    RunForward {
        /// Stop after this many events.
        #[arg(long)]
        events: Option<u64>,
    },
    /// Run one PSGLD chain, on a recorded event file or a live forward stream.
    RunPsgld {
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Sample, estimate the density and reconstruct the cost.
    Reconstruct,
    /// Print the schedule implied by `delta`.
    Schedule {
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Evaluate every constant and both bounds.
    Bounds {
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Distances between two sample clouds or two cost grids.
    Metrics {
        #[arg(long, requires = "b", conflicts_with_all = ["grid_a", "grid_b"])]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        #[arg(long, requires = "grid_b")]
        grid_a: Option<PathBuf>,
        #[arg(long, requires = "grid_a")]
        grid_b: Option<PathBuf>,
    },
    /// Regenerate a named acceptance experiment.
    Repro {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(experiments::NAMES))]
        name: String,
    },
}

/// What a subcommand prints on success.
#[derive(Debug)]
pub enum Reply {
    Json(serde_json::Value),
    Line(String),
}

impl Reply {
    /// Text for stdout, newline-terminated.
    pub fn render(&self) -> Result<String> {
        match self {
            Reply::Json(v) => to_json_string(v),
            Reply::Line(s) => Ok(format!("{s}\n")),
        }
    }
}

/// Runs one subcommand on the current rayon pool.
pub fn run(cli: &Cli) -> Result<Reply> {
    let g = &cli.global;
    let started = Instant::now();
    let delta = match &cli.command {
        Command::Schedule { delta } | Command::Bounds { delta } => *delta,
        _ => None,
    };
    let config = || ExperimentConfig::load_with(g.config.as_deref(), &Overrides { seed: g.seed, delta });
    let load = || -> Result<Setup> { Ok(Setup::new(config()?)?) };
    // reporting commands show A8 instead of refusing on it
    let inspect = || -> Result<Setup> { Ok(Setup::resolve(config()?)?) };
    let out_dir = |s: Option<&Setup>| -> Result<OutputDir> {
        let root = g.out_dir.clone().or_else(|| s.map(|s| PathBuf::from(&s.cfg.run.out_dir))).unwrap_or_else(|| "out".into());
        OutputDir::create(&root, g.format)
    };
    match &cli.command {
        Command::RunForward { events } => {
            let s = load()?;
            let mut out = out_dir(Some(&s))?;
            let v = commands::run_forward(&s, s.cfg.run.seed, *events, &mut out)?;
            commands::finish(out, RunManifest::new("run-forward", s.cfg.run.seed, g.format).with_setup(&s), started)?;
            Ok(Reply::Json(v))
        }
        Command::RunPsgld { events } => {
            let s = load()?;
            let mut out = out_dir(Some(&s))?;
            let v = commands::run_psgld(&s, s.cfg.run.seed, events.as_deref(), &mut out)?;
            commands::finish(out, RunManifest::new("run-psgld", s.cfg.run.seed, g.format).with_setup(&s), started)?;
            Ok(Reply::Json(v))
        }
        Command::Reconstruct => {
            let s = load()?;
            let mut out = out_dir(Some(&s))?;
            let v = commands::reconstruct(&s, s.cfg.run.seed, &mut out)?;
            commands::finish(out, RunManifest::new("reconstruct", s.cfg.run.seed, g.format).with_setup(&s), started)?;
            Ok(Reply::Json(v))
        }
        Command::Schedule { .. } => Ok(Reply::Json(commands::schedule(&inspect()?)?)),
        Command::Bounds { .. } => Ok(Reply::Json(commands::bounds(&inspect()?)?)),
        Command::Metrics { a, b, grid_a, grid_b } => {
            let input = match (a, b, grid_a, grid_b) {
                (Some(a), Some(b), _, _) => MetricsInput::Clouds(a, b),
                (_, _, Some(a), Some(b)) => MetricsInput::Grids(a, b),
                _ => anyhow::bail!("pass --a/--b sample clouds or --grid-a/--grid-b cost grids"),
            };
            Ok(Reply::Json(commands::metrics(input, g.seed.unwrap_or(experiments::DEFAULT_SEED))?))
        }
        Command::Repro { name } => {
            let root = g.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
            let r = experiments::repro(name, g.seed.unwrap_or(experiments::DEFAULT_SEED), &root, g.format)?;
            Ok(Reply::Line(r.line()))
        }
    }
}
