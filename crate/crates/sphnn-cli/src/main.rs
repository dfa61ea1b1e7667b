//! `sphnn`: build motif-induced hypergraphs from a typed heterogeneous
//! graph, train the hypergraph attention network on them, and run the
//! evaluation protocol (metric reports, label-rate sweep, lambda sweep,
//! ablations).
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
//! failure. Errors print one line on stderr as `<kind> error: <reason>`.
//! Output never uses color, so `NO_COLOR` is honored trivially; no other
//! environment variables are read.

mod commands;
mod config;
mod error;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "sphnn",
    version,
    about = "Motif-induced hypergraph networks on heterogeneous graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded synthetic dataset with planted paper classes.
    GenSynth {
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed; overrides the config file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Generator settings as JSON; defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Enumerate motif instances and dump the induced hypergraphs.
    Build {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Motif spec files, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        motifs: Vec<PathBuf>,
        /// Output directory for hypergraph JSON and stats.
        #[arg(long)]
        out: PathBuf,
        /// Keep at most this many instances per motif (seeded sample).
        #[arg(long)]
        max_instances: Option<usize>,
        /// Seed for the instance sample.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model and write checkpoint, history.csv, and report.json.
    Train {
        /// Run config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on one split of a dataset.
    Eval {
        /// Checkpoint directory written by train.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Split to score: train, val, or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// Directory for report.json; prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per lambda on a grid and write lambda_sweep.csv.
    SweepLambda {
        /// Run config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Grid as start:end:step, each lambda in (0, 1].
        #[arg(long, default_value = "0.1:1.0:0.1")]
        grid: String,
        /// Output directory; overrides the config's "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train across labeling rates and seeds and write rate_sweep.csv.
    SweepLabelRate {
        /// Run config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated labeling rates in (0, 1).
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6")]
        rates: String,
        /// Seeds per rate (seed, seed+1, ...).
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Output directory; overrides the config's "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the full model against its ablations on one dataset.
    Ablate {
        /// Run config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Seeds per variant (seed, seed+1, ...).
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Output directory; overrides the config's "out".
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check analytic gradients against central finite differences on a
    /// built-in 10-node fixture; exits 4 on failure.
    GradCheck {
        /// Run config JSON; only its "model" overrides are used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Failure threshold on the max relative error.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Parameter init seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::GenSynth { out, seed, config } => {
            commands::gen_synth(&out, seed, config.as_deref())
        }
        Cmd::Build {
            data,
            motifs,
            out,
            max_instances,
            seed,
        } => commands::build(&data, &motifs, &out, max_instances, seed),
        Cmd::Train { config, out } => commands::train_cmd(&config, out.as_deref()),
        Cmd::Eval {
            checkpoint,
            data,
            split,
            out,
        } => commands::eval_cmd(&checkpoint, &data, &split, out.as_deref()),
        Cmd::SweepLambda { config, grid, out } => {
            commands::sweep_lambda(&config, &grid, out.as_deref())
        }
        Cmd::SweepLabelRate {
            config,
            rates,
            seeds,
            out,
        } => commands::sweep_label_rate(&config, &rates, seeds, out.as_deref()),
        Cmd::Ablate { config, seeds, out } => commands::ablate(&config, seeds, out.as_deref()),
        Cmd::GradCheck {
            config,
            step,
            threshold,
            seed,
        } => commands::grad_check(config.as_deref(), step, threshold, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
