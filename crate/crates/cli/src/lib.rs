//! Command-line driver: configuration, pipeline orchestration and export.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use waveguide_imaging::ForwardModel;

pub use config::{load_config, RunConfig, Setup};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "wgimage",
    version,
    about = "Sampling-method imaging in a terminating rectangular waveguide"
)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Noise seed; overrides `noise.seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Forward model; overrides `model` from the config.
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Born,
    Ls,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the mode table and the propagating-mode counts.
    Modes,
    /// Synthesize point-source data and the modal data matrix.
    Synthesize,
    /// Image the scene from a stored data matrix.
    Image {
        /// Data matrix to image; defaults to `<output>/data.wgum`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write the point-spread function for a source point.
    Psf {
        /// Source point as `x1,x2,x3`.
        #[arg(long, allow_hyphen_values = true)]
        xstar: String,
    },
    /// Check the operator identities and write a report.
    Verify,
    /// Convert an image volume between CSV and VTK (by file extension).
    Export { input: PathBuf, output: PathBuf },
}

impl Cli {
    fn setup(&self) -> Result<Setup, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config is required for this subcommand".into()))?;
        load_config(path)
    }

    fn output_dir(&self, setup: &Setup) -> PathBuf {
        self.output.clone().unwrap_or_else(|| setup.config.output.dir.clone())
    }

    fn model(&self, setup: &Setup) -> ForwardModel {
        match (self.model, setup.config.model) {
            (None, m) => m,
            (Some(ModelArg::Born), _) => ForwardModel::Born,
            (Some(ModelArg::Ls), m @ ForwardModel::Ls { .. }) => m,
            (Some(ModelArg::Ls), ForwardModel::Born) => ForwardModel::ls_default(),
        }
    }

    fn seed(&self, setup: &Setup) -> u64 {
        self.seed.unwrap_or(setup.config.noise.seed)
    }
}

/// Runs one subcommand and returns its stdout text.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        return pool.install(|| dispatch(cli));
    }
    dispatch(cli)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    if let Command::Export { input, output } = &cli.command {
        return commands::export(input, output);
    }
    let setup = cli.setup()?;
    let dir = cli.output_dir(&setup);
    match &cli.command {
        Command::Modes => commands::modes(&setup),
        Command::Synthesize => commands::synthesize(&setup, cli.model(&setup), &dir),
        Command::Image { input } => commands::image(&setup, input.as_deref(), cli.seed(&setup), &dir),
        Command::Psf { xstar } => commands::psf(&setup, commands::parse_point(xstar)?, &dir),
        Command::Verify => commands::verify(&setup, cli.model(&setup), cli.seed(&setup), &dir),
        Command::Export { .. } => unreachable!("handled above"),
    }
}
