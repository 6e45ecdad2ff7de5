//! Command surface of the `cryptorisk` binary: `detect` runs the built-in
//! detector plus report adapters and emits merged misuse tuples, `assess`
//! annotates sink categories and computes per-app risk, `fleet` clusters and
//! mines the resulting reports, and `report` prints a human summary.
//!
//! Stage boundaries are files, so each step is independently re-runnable and
//! the whole pipeline is resumable. Every command is deterministic given the
//! same inputs and seed.

pub mod assess;
pub mod detect;
pub mod fleet;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use cryptorisk_core::taxonomy::Taxonomy;

/// Exit code 1: bad input. Exit code 2: an internal invariant was violated.
#[derive(Debug)]
pub enum AppError {
    Input(String),
    Internal(String),
}

impl AppError {
    pub fn input(msg: impl Into<String>) -> Self {
        AppError::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        AppError::Internal(msg.into())
    }
}

impl From<cryptorisk_core::Error> for AppError {
    fn from(e: cryptorisk_core::Error) -> Self {
        AppError::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cryptorisk",
    version,
    about = "Crypto-API misuse detection, data-flow risk assessment, and fleet summaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse CEIR programs, run the built-in detector and any external
    /// reports, and emit merged misuse tuples per app.
    Detect(detect::DetectArgs),
    /// Annotate tuples with sink categories, vote, and compute risk reports.
    Assess(assess::AssessArgs),
    /// Fleet-scale clustering and association-rule mining over risk reports.
    Fleet(FleetCommand),
    /// Print a per-app summary of risk reports.
    Report(report::ReportArgs),
}

#[derive(Args, Debug)]
pub struct FleetCommand {
    #[command(subcommand)]
    pub command: fleet::FleetSubcommand,
}

/// Shared `--catalog` handling: explicit file or the embedded default.
pub fn load_taxonomy(catalog: &Option<PathBuf>) -> Result<Taxonomy, AppError> {
    match catalog {
        Some(path) => Ok(Taxonomy::from_file(path)?),
        None => Ok(Taxonomy::builtin().clone()),
    }
}

/// Installs a rayon pool bounded by `--jobs` and runs `f` inside it.
pub fn with_jobs<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> Result<T, AppError> + Send,
) -> Result<T, AppError> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AppError::internal(format!("thread pool: {e}")))?
            .install(f),
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Detect(args) => detect::run(args),
        Command::Assess(args) => assess::run(args),
        Command::Fleet(FleetCommand { command }) => fleet::run(command),
        Command::Report(args) => report::run(args),
    }
}

/// Process entry, returning the exit code. Usage errors and bad inputs are 1,
/// internal invariant violations are 2.
pub fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits.
            if e.use_stderr() {
                eprint!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(AppError::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(AppError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            2
        }
    }
}
