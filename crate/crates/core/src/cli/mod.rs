//! Command-line front end: `transform`, `downfold`, `dynamics`, `inspect`.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::par;

#[derive(Debug, Parser)]
#[command(name = "fermirot", version, about = "Exact fermionic rotations, Hamiltonian downfolding and Heisenberg dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Seed for randomized models; overrides the config value.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rotate an operator by a single-product generator.
    Transform(TransformArgs),
    /// Adaptive block-diagonalization of a model Hamiltonian.
    Downfold,
    /// Trotterized Heisenberg evolution of a number operator.
    Dynamics,
    /// Term count, rank partition and Hermiticity of an operator or FCIDUMP.
    Inspect(InspectArgs),
}

#[derive(Clone, Debug, Default, Args)]
pub struct TransformArgs {
    /// Operator product as `CREATORS:ANNIHILATORS`, e.g. `0,1:0,2`.
    #[arg(long, allow_hyphen_values = true)]
    pub operator: Option<String>,
    /// Generator product, same syntax.
    #[arg(long)]
    pub generator: Option<String>,
    /// `anti_hermitian` (A = T - T†) or `hermitian` (H = T + T†).
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct InspectArgs {
    /// Operator-sum JSON or FCIDUMP file.
    pub path: Option<PathBuf>,
}

/// Exit status for a library error: 2 for bad input, 3 for an algebra
/// invariant violation, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::StructuralViolation { .. } => 3,
        Error::Io(_) | Error::NotHermitian(_) | Error::UnsupportedKind { .. } => 1,
        _ => 2,
    }
}

/// Parses `args` and runs the selected subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.common.threads;
    match par::with_threads(threads, || commands::dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
