//! `sicsim`: command-line front end for the self-interference cancellation
//! toolkit: dataset generation, canceller fitting and training, evaluation,
//! design-space sweeps, quantization studies and hardware reports.
//!
//! Every command is deterministic under a fixed seed: rerunning produces
//! byte-identical outputs, and each output embeds a hash of the resolved
//! configuration it came from.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Resolved, RunConfig};

/// Command failure with its process exit code: 2 for configuration errors,
/// 3 for data errors, 4 for hardware-constraint violations.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Constraint(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Constraint(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Constraint(m) => m,
        }
    }
}

impl From<sic_core::hwmodel::HwError> for CliError {
    fn from(e: sic_core::hwmodel::HwError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<sic_core::sigmodel::file::FileError> for CliError {
    fn from(e: sic_core::sigmodel::file::FileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sic_core::lincanc::FitError> for CliError {
    fn from(e: sic_core::lincanc::FitError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "sicsim",
    version,
    about = "Digital self-interference cancellation: cancellers, fixed-point paths and hardware models"
)]
struct Cli {
    /// Declarative experiment description (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: config `out_dir`, then $SICSIM_OUT_ROOT,
    /// then the current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master seed for dataset generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic full-duplex dataset and write it with its JSON
    /// sidecar.
    Gen {
        /// Number of baseband samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "dataset.sicd")]
        out: String,
    },
    /// Fit a linear or polynomial canceller by least squares.
    Fit {
        #[arg(long)]
        dataset: PathBuf,
        /// `linear` or `poly`.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        p: Option<u32>,
        /// Output model file name (companion `<stem>_linear.json` is written
        /// alongside polynomial models).
        #[arg(long)]
        out: Option<String>,
    },
    /// Train the hybrid network canceller.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        n_h: Option<u32>,
        #[arg(long)]
        n_l: Option<u32>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "model_nn.json")]
        out: String,
    },
    /// Evaluate cancellers on a dataset: cancellation ratios, operation
    /// counts and residual spectra.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        linear: Option<PathBuf>,
        /// Polynomial model (its `<stem>_linear.json` companion must exist).
        #[arg(long)]
        poly: Option<PathBuf>,
        /// Network model; repeat for several.
        #[arg(long = "nn")]
        nn: Vec<PathBuf>,
        /// Also write residual power-spectral-density CSV files.
        #[arg(long)]
        psd: bool,
    },
    /// Grid-evaluate canceller families over their design space.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        /// `poly`, `nn` or `all`.
        #[arg(long)]
        family: Option<String>,
    },
    /// Sweep the datapath bit-width and report fixed-point cancellation per
    /// canceller.
    Qsweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        poly: Option<PathBuf>,
        #[arg(long = "nn")]
        nn: Vec<PathBuf>,
        #[arg(long)]
        q_min: Option<u32>,
        #[arg(long)]
        q_max: Option<u32>,
    },
    /// Analytical and simulated hardware reports for the preset
    /// architectures.
    Hwreport {
        /// `equi`, `peak`, `poly` or `all`.
        #[arg(long, default_value = "all")]
        preset: String,
        /// Use a trained network model for the simulated datapath.
        #[arg(long)]
        nn_model: Option<PathBuf>,
        /// Use a fitted polynomial model for the simulated datapath.
        #[arg(long)]
        poly_model: Option<PathBuf>,
    },
    /// Print the embedded default configuration.
    Defaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os("SICSIM_OUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let resolved = Resolved::new(cfg, cli.seed);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("cannot create output directory: {e}")))?;

    match cli.command {
        Command::Gen { samples, out } => commands::gen::run(&resolved, &out_dir, samples, &out),
        Command::Fit { dataset, kind, l, p, out } => {
            commands::fit::run(&resolved, &out_dir, &dataset, &kind, l, p, out.as_deref())
        }
        Command::Train { dataset, l, n_h, n_l, epochs, out } => {
            commands::train::run(&resolved, &out_dir, &dataset, l, n_h, n_l, epochs, &out)
        }
        Command::Eval { dataset, linear, poly, nn, psd } => {
            commands::eval::run(&resolved, &out_dir, &dataset, linear, poly, &nn, psd)
        }
        Command::Sweep { dataset, family } => {
            commands::sweep::run(&resolved, &out_dir, &dataset, family.as_deref())
        }
        Command::Qsweep { dataset, poly, nn, q_min, q_max } => {
            commands::qsweep::run(&resolved, &out_dir, &dataset, poly, &nn, q_min, q_max)
        }
        Command::Hwreport { preset, nn_model, poly_model } => {
            commands::hwreport::run(&resolved, &out_dir, &preset, nn_model, poly_model)
        }
        Command::Defaults => {
            print!("{}", sic_core::presets::SynthDefaults::raw_toml());
            Ok(())
        }
    }
}
