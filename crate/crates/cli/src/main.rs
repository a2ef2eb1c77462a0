//! `dpde`: generate point clouds, estimate boundaries, assemble operators,
//! solve PDEs and run the verification experiments from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "dpde", version, about = "Mesh-free PDE solvers on sampled manifolds with boundary")]
struct Cli {
    /// JSON file with default settings; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic point cloud as CSV.
    Generate(RunConfig),
    /// Per-point distance to the boundary and outward normal.
    EstimateBoundary(RunConfig),
    /// Assemble kernel, stiffness, mass and boundary operators into a directory.
    BuildOperators(RunConfig),
    /// Solve a built-in or file-provided problem.
    Solve(RunConfig),
    /// Run a verification experiment or a PDE error sweep.
    Verify(RunConfig),
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 3,
            CliError::Validation(_) | CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Solver(m) => write!(f, "solver failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<diffusion_pde::Error> for CliError {
    fn from(e: diffusion_pde::Error) -> Self {
        match e {
            diffusion_pde::Error::Solver { .. } => CliError::Solver(e.to_string()),
            diffusion_pde::Error::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure worker pool: {e}")))?;
    }
    let base = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let (flags, handler): (&RunConfig, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Generate(c) => (c, commands::generate),
        Command::EstimateBoundary(c) => (c, commands::estimate_boundary),
        Command::BuildOperators(c) => (c, commands::build_operators),
        Command::Solve(c) => (c, commands::solve),
        Command::Verify(c) => (c, commands::verify),
    };
    let config = base.overlay(flags);
    config.validate()?;
    handler(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpde: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
