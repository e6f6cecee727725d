//! appcast: synthetic click-stream generation, online replay of the
//! prediction policies, metric reports, and regret-bound audits.
//!
//! Every command is deterministic given its flags and seeds. Usage errors
//! exit 2 (clap's default), runtime failures exit 1, and all file outputs
//! are written atomically (temp file + rename).

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

mod bound;
mod gen;
mod out;
mod report;
mod run;

/// Seed used when neither a flag, a config file, nor APPCAST_SEED names one.
const DEFAULT_SEED: u64 = 0x0a99_ca57;

#[derive(Parser)]
#[command(
    name = "appcast",
    version,
    about = "App-usage prediction workbench: generate streams, replay policies, compare, audit"
)]
enum Cli {
    /// Generate a synthetic multi-device click stream.
    Gen(gen::GenArgs),
    /// Replay an event log through one prediction policy.
    Run(run::RunArgs),
    /// Merge finished runs into side-by-side comparison tables.
    Report(report::ReportArgs),
    /// Check the online AUC regret bound on a recorded run.
    Bound(bound::BoundArgs),
}

fn main() -> ExitCode {
    let result = match Cli::parse() {
        Cli::Gen(args) => gen::exec(args),
        Cli::Run(args) => run::exec(args),
        Cli::Report(args) => report::exec(args),
        Cli::Bound(args) => bound::exec(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Seed precedence: explicit flag, then config file, then the APPCAST_SEED
/// environment variable, then the built-in default.
fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var("APPCAST_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .with_context(|| format!("APPCAST_SEED {v:?} is not a u64")),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(e) => bail!("reading APPCAST_SEED: {e}"),
    }
}
