//! Command-line surface: `ot-solve`, `adapt` and `bench`.
//!
//! Exit codes: 0 success, 2 unreadable or invalid input, 3 solver failure,
//! 4 training divergence. Every failure prints one JSON object on stderr.

mod adapt;
mod bench;
mod ot_solve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::Error;

pub use adapt::{cmd_adapt, AdaptArgs, RunManifest, MANIFEST_FILE, METRICS_FILE, CHECKPOINT_FILE};
pub use bench::{cmd_bench, BenchArgs, BenchRow, Suite, BASE_SEED, DIGITS_DIR_ENV, REFERENCE_NOTE};
pub use ot_solve::{cmd_ot_solve, OtSolveArgs, SolveMethod, SolveSummary};

/// Environment variable naming the default root for run directories.
pub const OUT_ROOT_ENV: &str = "GEOCOT_OUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "geocot", version, about = "Optimal transport for domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one discrete OT instance and write the plan and a summary.
    OtSolve(OtSolveArgs),
    /// Run one adaptation experiment into a run directory.
    Adapt(AdaptArgs),
    /// Compare source-only, single-map and collaborative training.
    Bench(BenchArgs),
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } | Error::NonFinite(_) => EXIT_DIVERGED,
        Error::SolverCapExceeded { .. } | Error::SolverFailed(_) | Error::NotConverged { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::InvalidMeasure(_) => "invalid_measure",
        Error::InvalidCost(_) => "invalid_cost",
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::SolverCapExceeded { .. } => "solver_cap_exceeded",
        Error::SolverFailed(_) => "solver_failed",
        Error::NotConverged { .. } => "not_converged",
        Error::MissingLabels(_) => "missing_labels",
        Error::LabelOutOfRange { .. } => "label_out_of_range",
        Error::ClusterMassMismatch(_) => "cluster_mass_mismatch",
        Error::NonFinite(_) => "non_finite",
        Error::Diverged { .. } => "diverged",
        Error::BadMagic { .. } => "bad_magic",
        Error::Truncated(_) => "truncated",
        Error::CountMismatch(_) => "count_mismatch",
        Error::VersionMismatch { .. } => "version_mismatch",
        Error::Corrupted(_) => "corrupted",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// The JSON object printed on stderr for a failed command.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut v = json!({
        "error": error_kind(err),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::InvalidConfig(problems) = err {
        v["problems"] = json!(problems);
    }
    v
}

/// Default directory for a run named `name`.
pub(crate) fn default_out_dir(name: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(name)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return EXIT_OK;
            }
            let msg = e.to_string();
            eprintln!("{}", json!({"error": "usage", "message": msg.trim(), "exit_code": EXIT_INPUT}));
            return EXIT_INPUT;
        }
    };
    let result = match &cli.command {
        Command::OtSolve(a) => cmd_ot_solve(a).map(|_| ()),
        Command::Adapt(a) => cmd_adapt(a).map(|_| ()),
        Command::Bench(a) => cmd_bench(a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
