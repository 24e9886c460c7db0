//! `geoprior`: synthetic data, prior training, prediction, fusion, evaluation
//! and resampling from the command line.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoprior::{Error, Result};

use commands::{EvalFlags, FuseFlags, ResampleFlags, SynthFlags, TrainFlags};

/// Bad input data, configuration or flag values.
const EXIT_VALIDATION: u8 = 3;
/// Unreadable or unwritable files.
const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "geoprior", version, about = "Location/date priors fused with image classifier output")]
struct Cli {
    /// Flat TOML file of settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train/test sightings and simulated image probabilities.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        classes: Option<usize>,
        #[command(flatten)]
        flags: SynthFlags,
    },
    /// Train the location/date prior network.
    TrainGeo {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Write prior probabilities for every observation in a file.
    PredictGeo {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiply image and prior probabilities row by row.
    Fuse {
        #[arg(long)]
        image_probs: PathBuf,
        #[arg(long)]
        geo_probs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: FuseFlags,
    },
    /// Top-k micro/macro accuracy report.
    Eval {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: EvalFlags,
    },
    /// Class weights or a rebalanced sample set, with an audit plan.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: ResampleFlags,
    },
}

fn run(cli: Cli) -> Result<()> {
    let file = settings::load_table(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { out, classes, flags } => {
            if classes.is_some() {
                return Err(Error::InvalidConfig(
                    "--classes cannot be set: the class count is always twice --pairs".into(),
                ));
            }
            commands::synth(settings::merge(&file, &flags)?, out.as_deref())
        }
        Command::TrainGeo { train, val, out, flags } => {
            commands::train_geo(settings::merge(&file, &flags)?, &train, val.as_deref(), out.as_deref())
        }
        Command::PredictGeo { model, input, out } => commands::predict_geo(&model, &input, out.as_deref()),
        Command::Fuse { image_probs, geo_probs, out, flags } => {
            commands::fuse(settings::merge(&file, &flags)?, &image_probs, &geo_probs, out.as_deref())
        }
        Command::Eval { probs, truth, out, flags } => {
            commands::eval(settings::merge(&file, &flags)?, &probs, &truth, out.as_deref())
        }
        Command::Resample { input, out, flags } => {
            commands::resample(settings::merge(&file, &flags)?, &input, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_VALIDATION })
        }
    }
}
