//! `freqgen`: batch augmentation, spectrum dumps, gradient checks, training
//! runs and hyper-parameter sweeps.

mod augment;
mod commands;
mod error;
mod pool;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "freqgen", version, about = "Frequency-restriction augmentation and Tail Interaction tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    TwoStep,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    UnitSize,
    KernelSize,
    Severity,
    Scaling,
    EmbedDim,
    Epochs,
    LearningRate,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augments every image under IN_DIR into a mirrored tree under OUT_DIR.
    Augment(AugmentArgs),
    /// Writes log-amplitude and phase images of the centered spectrum.
    Spectrum {
        image: PathBuf,
        /// Outputs go to `<prefix>_amplitude.png` and `<prefix>_phase.png`.
        out_prefix: PathBuf,
    },
    /// Finite-difference checks of every hand-written gradient.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Leave-one-domain-out training from a `key = value` config file.
    Train {
        config: PathBuf,
        /// Metrics CSV destination.
        #[arg(long, short)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Runs the ablation grid instead of the single configuration.
        #[arg(long)]
        ablation: bool,
        /// Seeds for the ablation grid.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Also writes the aggregated ablation CSV here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Trains once per value of one hyper-parameter and aggregates.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Seeds per value; defaults to the config's seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(clap::Args, Debug)]
pub struct AugmentArgs {
    pub in_dir: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "two-step")]
    pub mode: Mode,
    /// High-pass diameter (two-step mode).
    #[arg(long)]
    pub d: Option<f64>,
    /// Amplitude scaling factor (two-step mode).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Phase scaling factor (two-step mode).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Samples d, alpha and beta per image from the seed and relative path.
    #[arg(long, conflicts_with_all = ["d", "alpha", "beta"])]
    pub random: bool,
    #[arg(long)]
    pub no_amplitude_scaling: bool,
    #[arg(long)]
    pub no_phase_scaling: bool,
    /// Gaussian kernel size (gaussian mode).
    #[arg(long, default_value_t = freqgen::spatial::DEFAULT_KERNEL_SIZE)]
    pub kernel: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overwrites existing outputs.
    #[arg(long)]
    pub force: bool,
}

/// `--seed`, else `FREQGEN_SEED`, else a usage error.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("FREQGEN_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("FREQGEN_SEED is not an unsigned integer: '{v}'"))),
        Err(_) => Err(CliError::usage("a seed is required: pass --seed or set FREQGEN_SEED")),
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Augment(args) => augment::run(&args),
        Command::Spectrum { image, out_prefix } => commands::spectrum(&image, &out_prefix),
        Command::Gradcheck { seed } => commands::gradcheck(resolve_seed(seed)?),
        Command::Train { config, out, seed, ablation, seeds, table } => {
            commands::train(&config, &out, seed, ablation.then_some(seeds.as_slice()), table.as_deref())
        }
        Command::Sweep { param, values, config, out, seeds, workers } => {
            commands::sweep(param, &values, &config, &out, &seeds, workers)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::Status::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
