//! `lagrange`: batch front end for the geodesic and Eulerian solvers.
//!
//! Exit codes: 0 success, 1 self-test failure or I/O error, 2 configuration
//! error, 3 blow-up (with a failure record in the manifest), 4 failed
//! comparison verdict.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::SelftestOptions;
use config::{ConfigError, RawConfig, RunConfig};

#[derive(Parser)]
#[command(name = "lagrange", version, about = "Lagrangian geodesic and Eulerian solvers for incompressible Euler flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the geodesic equation for the flow map.
    Geodesic(RunArgs),
    /// Integrate the Eulerian reference solver.
    Euler(RunArgs),
    /// Run both solvers and compare velocities and flow maps.
    Compare(RunArgs),
    /// Exponential map, star-shapedness probe and trajectory fits.
    Expmap(RunArgs),
    /// Run the invariant suite at reduced resolution.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (`key = value` lines); a run manifest works too.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set N=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Corrupt one multiplier-table entry to check that the suite notices.
    #[arg(long)]
    inject_fault: bool,
    /// Tolerance override, e.g. `--tol homogeneity=1e-20`.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Run at desk scale instead of the reduced resolution.
    #[arg(long)]
    desk: bool,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for s in &args.set {
        raw.set(s)?;
    }
    if let Some(out) = &args.out {
        raw.set(&format!("output={}", out.display()))?;
    }
    raw.resolve()
}

fn parse_tolerances(items: &[String]) -> Result<Vec<(String, f64)>, ConfigError> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("`{s}` is not `key=value`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("`{s}`: cannot parse value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Geodesic(a) => commands::geodesic(&load(&a)?),
        Command::Euler(a) => commands::euler(&load(&a)?),
        Command::Compare(a) => commands::compare(&load(&a)?),
        Command::Expmap(a) => commands::expmap(&load(&a)?),
        Command::Selftest(a) => commands::selftest(&SelftestOptions {
            inject_fault: a.inject_fault,
            overrides: parse_tolerances(&a.tol)?,
            desk: a.desk,
            only: a.only,
        }),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
