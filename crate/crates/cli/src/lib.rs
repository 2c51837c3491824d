//! The `saarb` command line: `solve`, `bounds`, `mc` and `verify`.
//!
//! Exit codes: 0 success, 1 property or dominance failure, 2 configuration error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable capping the worker count of `mc`.
pub const THREADS_ENV: &str = "SAARB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] saarb_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "saarb", version, about = "Risk-averse SAA with explicit deviation bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one SAA instance on a fresh sample and print the result as JSON.
    Solve(CommonArgs),
    /// Evaluate the tail bounds over the (n, eps, t) grids.
    Bounds(CommonArgs),
    /// Run the Monte Carlo experiment and write the report files.
    Mc(CommonArgs),
    /// Run the numeric self-checks.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; optional for `verify`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a config entry, e.g. `--set mc.seed=7` or `--set n=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn parse_threads(raw: Option<&str>) -> Result<Option<usize>, CliError> {
    match raw {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

fn dispatch(cli: &Cli, threads_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let (Command::Solve(a) | Command::Bounds(a) | Command::Mc(a) | Command::Verify(a)) = &cli.command;
    let needs_config = !matches!(cli.command, Command::Verify(_));
    if needs_config && a.config.is_none() {
        return Err(CliError::Config("--config is required".into()));
    }
    let cfg = config::load(a.config.as_deref(), &a.overrides)?;
    match &cli.command {
        Command::Solve(_) => {
            let r = commands::solve(&cfg)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
            Ok(EXIT_OK)
        }
        Command::Bounds(_) => {
            let r = commands::bounds(&cfg)?;
            if let Some(dir) = &a.out {
                commands::write_bounds(&r, dir)?;
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
            Ok(EXIT_OK)
        }
        Command::Mc(_) => {
            let threads = parse_threads(threads_env)?;
            let dir = a.out.clone().unwrap_or_else(|| PathBuf::from("saarb-out"));
            let s = commands::mc(&cfg, threads, &dir)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&s)?)?;
            if s.violated {
                writeln!(err, "dominance violated in {} cell(s)", s.verdicts.violated)?;
                return Ok(EXIT_FAILURE);
            }
            Ok(EXIT_OK)
        }
        Command::Verify(_) => {
            let names = cfg.verify.checks.as_deref();
            if names.is_some_and(|n| n.is_empty()) {
                writeln!(err, "warning: empty check list, nothing verified")?;
                return Ok(EXIT_OK);
            }
            let results = verify::run(names, cfg.verify.corrupt.as_deref())?;
            for r in &results {
                let tag = if r.pass { "PASS" } else { "FAIL" };
                writeln!(
                    out,
                    "{tag} {}: worst {} (tolerance {}, {} cases)",
                    r.name,
                    report::fmt_g(r.worst),
                    report::fmt_g(r.tolerance),
                    r.cases
                )?;
            }
            Ok(if results.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

/// Runs a parsed command; errors are printed to `err` and mapped to exit code 2.
pub fn run(cli: &Cli, threads_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(cli, threads_env, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_env_parsing() {
        assert_eq!(parse_threads(None).unwrap(), None);
        assert_eq!(parse_threads(Some(" 4 ")).unwrap(), Some(4));
        assert!(parse_threads(Some("0")).is_err());
        assert!(parse_threads(Some("many")).is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::parse_from(["saarb", "mc", "--config", "c.json", "--set", "n=5", "--set", "seed=2"]);
        let Command::Mc(a) = cli.command else { panic!("mc expected") };
        assert_eq!(a.overrides, vec!["n=5", "seed=2"]);
    }
}
