//! `hypersr`: hyperspectral super-resolution from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 failure
//! while processing.

mod commands;
mod failure;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use failure::Failure;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hypersr",
    version,
    about = "Hyperspectral image super-resolution toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cut dataset images into aligned LR/HR patch pairs.
    Prepare(PrepareArgs),
    /// Train a model from a run config.
    Train(TrainArgs),
    /// Score a checkpoint on the test split, next to a bicubic baseline.
    Eval(EvalArgs),
    /// Super-resolve one cube with a trained checkpoint.
    Sr(SrArgs),
    /// Render band triplets and an error heat map for visual inspection.
    Viz(VizArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Upscaling factor.
    #[arg(long)]
    tau: usize,
    /// HR patch edge in pixels.
    #[arg(long)]
    patch: usize,
    /// Output store directory.
    #[arg(long)]
    out: PathBuf,
    /// Halve RGB sources with bicubic resampling before patching.
    #[arg(long = "rgb-predownsample-2")]
    rgb_predownsample_2: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from this checkpoint directory.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint directory to score.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SrArgs {
    /// Checkpoint directory.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Input low-resolution cube (.hsr).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output cube path (.hsr).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VizArgs {
    /// Reference cube (.hsr).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Estimated cube (.hsr).
    #[arg(long)]
    est: PathBuf,
    /// Output directory for the rendered images.
    #[arg(long)]
    out: PathBuf,
    /// Three 1-based display bands, e.g. 5,15,25. Required unless the
    /// cubes have 31 bands.
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<usize>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Prepare(args) => commands::prepare::run(args),
        Cmd::Train(args) => commands::train::run(args),
        Cmd::Eval(args) => commands::eval::run(args),
        Cmd::Sr(args) => commands::sr::run(args),
        Cmd::Viz(args) => commands::viz::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
