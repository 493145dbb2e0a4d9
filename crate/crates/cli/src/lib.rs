//! `rtil` experiment runner.
//!
//! Exit codes: 0 success, 1 failed check or numerical failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::{Parser, Subcommand};

pub mod config;
pub mod invert;
pub mod sweep;
pub mod train;
pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files.
    Usage(String),
    /// A failed verdict or a numerical breakdown.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    pub fn prefixed(self, context: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{context}: {m}")),
            CliError::Failure(m) => CliError::Failure(format!("{context}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "failure: {m}"),
        }
    }
}

impl From<rtil_core::Error> for CliError {
    fn from(e: rtil_core::Error) -> Self {
        use rtil_core::Error as E;
        match e {
            E::Numerical { .. } | E::Singular(_) | E::StepSize(_) => {
                CliError::Failure(e.to_string())
            }
            E::Contract(_) | E::Config(_) | E::Parse { .. } | E::Io(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rtil",
    version,
    about = "Layered generative priors: theory checks, training, inversion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the two-layer linear theory on seeded instances.
    Verify(verify::VerifyArgs),
    /// Run an inversion sweep over undersampling ratios and write CSV.
    Sweep(sweep::SweepArgs),
    /// Train paired vanilla and RTIL generators.
    Train(train::TrainArgs),
    /// Invert one measurement with CSGM, ILO or mGANprior.
    Invert(invert::InvertArgs),
}

/// Runs the CLI, writing reports to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => verify::run(a, out, err),
        Command::Sweep(a) => sweep::run(a, out, err),
        Command::Train(a) => train::run(a, out, err),
        Command::Invert(a) => invert::run(a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

pub(crate) fn io_failure(e: std::io::Error) -> CliError {
    CliError::Failure(format!("output: {e}"))
}

/// Thread pool honouring `--jobs` (0 or absent: rayon's default).
pub(crate) fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}
