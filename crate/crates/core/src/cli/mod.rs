//! Command-line front end. Every subcommand reads one project file; see
//! [`config::ProjectConfig`].
//!
//! Exit codes: 0 success, 1 a verification or monitoring check failed,
//! 2 the configuration or its inputs are invalid, 3 synthesis failed.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{Failure, Overrides};
pub use config::ProjectConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SYNTHESIS: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "compcbf", version, about = "Compositional barrier certificates for networks of control subsystems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complement the automaton, list run fragments, triplets and partition keys.
    Decompose(CommonArgs),
    /// Build the gain matrix of each key and test the small-gain condition.
    CheckSmallgain(CommonArgs),
    /// Verify local certificates, compose them and check the composed decrease.
    Verify(CommonArgs),
    /// Search local certificates by counterexample-guided synthesis.
    Synthesize(CommonArgs),
    /// Roll out the hybrid controller and monitor the specification.
    Simulate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Project file.
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `output` of the project file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid step for verification and the last synthesis scan.
    #[arg(long)]
    pub grid_resolution: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Network size for the built-in systems.
    #[arg(long)]
    pub n: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            grid_resolution: self.grid_resolution,
            horizon: self.horizon,
            n: self.n,
        }
    }
}

type CommandFn = fn(&ProjectConfig, &Overrides) -> Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to stderr, summaries to stdout.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (common, cmd): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Decompose(a) => (a, commands::decompose),
        Command::CheckSmallgain(a) => (a, commands::check_smallgain),
        Command::Verify(a) => (a, commands::verify),
        Command::Synthesize(a) => (a, commands::synthesize),
        Command::Simulate(a) => (a, commands::simulate),
    };
    let result = ProjectConfig::load(&common.config)
        .map_err(|e| Failure::config("config", e))
        .and_then(|cfg| cmd(&cfg, &common.overrides()));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, f.message);
            f.code
        }
    }
}
