use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use siabf::SiabfError;

mod commands;
mod config;

use config::{ConfigLayer, RunConfig};

/// Sparse identification with adaptive Fourier bases: spectral period
/// discovery, sparse fitting and iteration-free forecasting.
#[derive(Debug, Parser)]
#[command(name = "siabf", version)]
struct Cli {
    /// JSON file with default settings (keys are the long flag names)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectrum, sorting diagram, adaptive periods and quasi-periodic index
    Analyze {
        #[command(flatten)]
        settings: ConfigLayer,
    },
    /// Fit a sparse model and write model.json
    Fit {
        #[command(flatten)]
        settings: ConfigLayer,
    },
    /// Forecast the horizon from a saved model
    Predict {
        /// Model file [default: <out>/model.json]
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        settings: ConfigLayer,
    },
    /// Compare a predictions CSV against a truth CSV
    Evaluate {
        /// Predictions CSV [default: <out>/predictions.csv]
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Truth CSV [default: --input]
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Value column of the predictions file
        #[arg(long, default_value = "prediction")]
        pred_col: String,
        #[command(flatten)]
        settings: ConfigLayer,
    },
    /// Clean vs. corrupted training comparison
    Robustness {
        #[command(flatten)]
        settings: ConfigLayer,
    },
}

fn exit_code(err: &SiabfError) -> u8 {
    match err {
        SiabfError::Internal(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), SiabfError> {
    let file_layer = match &cli.config {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let resolve = |flags: ConfigLayer| RunConfig::resolve(flags.over(file_layer.clone()));
    match cli.command {
        Command::Analyze { settings } => commands::analyze(&resolve(settings)?),
        Command::Fit { settings } => commands::fit(&resolve(settings)?),
        Command::Predict { model, settings } => {
            commands::predict(&resolve(settings)?, model.as_ref())
        }
        Command::Evaluate {
            predictions,
            truth,
            pred_col,
            settings,
        } => commands::evaluate(
            &resolve(settings)?,
            predictions.as_ref(),
            &pred_col,
            truth.as_ref(),
        ),
        Command::Robustness { settings } => commands::robustness(&resolve(settings)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
