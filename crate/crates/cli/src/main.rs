//! `nagumo`: thresholds, figure data, horseshoe certificates and periodic
//! orbit search for the switched Nagumo oscillator.

mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, RunConfig};

/// A negative outcome: failed certification or no orbit found.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct Failed(pub String);

/// Invalid command-line input that clap cannot catch.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser, Debug)]
#[command(name = "nagumo", version, about)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Crossing paths per stretching relation (overrides `paths`).
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Relative integration tolerance; the absolute one is 1e-2 of it.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of symbols (overrides `p_symbols`).
    #[arg(long, global = true)]
    symbols: Option<usize>,
    /// Search for orbits without a matching passing certificate.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Threshold constants and the regime verdict.
    Thresholds,
    /// Data files for figure 1 to 5.
    Figure { k: usize },
    /// Level lines of both autonomous energies.
    Levelsets,
    /// Time-map tables and a seeded comparison with integration.
    Timemap,
    /// Switched trajectory from `x0`, `y0` over `blocks` periods.
    Orbit,
    /// Certify the horseshoe and write the certificate.
    Certify,
    /// Periodic orbit with the given itinerary, e.g. "1,2".
    FindPeriodic { itinerary: String },
    /// Certification over the `scan_*` grid.
    Scan,
}

fn load(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(n) = cli.paths {
        cfg.paths = n;
    }
    if let Some(tol) = cli.tol {
        cfg.rtol = tol;
        cfg.atol = tol * 1e-2;
    }
    if let Some(p) = cli.symbols {
        cfg.p_symbols = p;
    }
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Failed>() {
        return 1;
    }
    if err.is::<UsageError>() {
        return 2;
    }
    if err.is::<ConfigError>() {
        return 2;
    }
    match err.downcast_ref::<nagumo_core::Error>() {
        Some(nagumo_core::Error::NotFound { .. }) => 1,
        Some(nagumo_core::Error::InvalidParams(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Thresholds => commands::thresholds(&cfg),
        Command::Figure { k } => commands::figure(*k, &cfg),
        Command::Levelsets => commands::levelsets(&cfg),
        Command::Timemap => commands::timemap(&cfg),
        Command::Orbit => commands::orbit(&cfg),
        Command::Certify => commands::certify(&cfg),
        Command::FindPeriodic { itinerary } => {
            commands::find_periodic_cmd(&cfg, itinerary, cli.force)
        }
        Command::Scan => commands::scan(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
