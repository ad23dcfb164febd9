//! Command-line front end for the dividend/reinsurance solver.
//!
//! Every subcommand writes one CSV file into the output directory. The first
//! line of each file is a `#` comment recording the tool version, the model
//! and every numeric control, so that a file fully describes its own run.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{run, Context, Outcome};
pub use config::{KeyValues, ParamGroup};
pub use output::Table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure in {stage}: {source}")]
    Numeric {
        stage: String,
        #[source]
        source: divreins_core::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration and output problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    /// Wraps a solver error, keeping the innermost stage label when present.
    pub fn numeric(stage: &str, err: divreins_core::Error) -> Self {
        match err {
            divreins_core::Error::InvalidParams(report) => CliError::Config(report.to_string()),
            divreins_core::Error::Stage { stage, source } => CliError::Numeric {
                stage: stage.to_string(),
                source: *source,
            },
            source => CliError::Numeric {
                stage: stage.to_string(),
                source,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "divreins", version, about = "Optimal dividend barrier and reinsurance under a ruin constraint")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// Flat `key = value` file with model keys and numeric controls.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Sets or overrides one key, e.g. `--param mu=2.5`. Repeatable.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,

    /// Risk level in (0, 1). Default 0.05.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Horizon T. Default 500, or 200 for `simulate`.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,

    /// Space nodes of the ruin PDE. Default 800.
    #[arg(long, global = true)]
    pub grid_ny: Option<usize>,

    /// Time steps of the ruin PDE. Default: matched to the space step.
    #[arg(long, global = true)]
    pub grid_nt: Option<usize>,

    /// Monte Carlo paths. Default 10000.
    #[arg(long, global = true)]
    pub paths: Option<usize>,

    /// Euler step. Default 1e-3.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    /// Base seed of the path streams. Default 20240601.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing. Default `.`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Points of the x axis in value tables. Default 20.
    #[arg(long, global = true, value_name = "N")]
    pub x_grid: Option<usize>,

    /// Upper limit of the barrier search. Default 1024 b0.
    #[arg(long, global = true)]
    pub b_max: Option<f64>,

    /// Tolerance on the ruin probability at the constrained barrier. Default 1e-4.
    #[arg(long, global = true)]
    pub psi_tol: Option<f64>,

    /// Barrier for `ruin`, `value`, `simulate`, `lower-bound` (default b0)
    /// and the figure 2-4 sweeps (default 100).
    #[arg(long, global = true)]
    pub barrier: Option<f64>,

    /// Initial reserve for `simulate` (default: the barrier) or a single
    /// probe point for `ruin`.
    #[arg(long, global = true)]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Full pipeline: regime, barriers, risk capital, value table.
    Solve,
    /// One of the five figure sweeps.
    Sweep {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        figure: u8,
        /// Points along the swept parameter. Default 20.
        #[arg(long)]
        sweep_points: Option<usize>,
        /// Figure 3: let the drift move with the preferred level,
        /// `mu = mu + 2 a p`, instead of holding it fixed.
        #[arg(long)]
        fig3_covary_mu: bool,
    },
    /// Ruin probability slices from the PDE.
    Ruin,
    /// Value function table `g(x, b)`.
    Value,
    /// Monte Carlo estimate of ruin probability and dividends.
    Simulate,
    /// Lower bound on the ruin probability at a barrier.
    LowerBound,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Ruin => "ruin",
            Command::Value => "value",
            Command::Simulate => "simulate",
            Command::LowerBound => "lower-bound",
        }
    }
}
