//! Command-line front end for `diffgeo`.
//!
//! Every command reads a JSON config (`--config`), prints a JSON summary on
//! stdout and, with `--out DIR`, writes the summary and any CSV tables there.
//! Failures print `{"error": {"code": ..., "message": ...}}` instead.

pub mod circle;
pub mod config;
pub mod error;
pub mod landmarks;
pub mod line;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::output::Report;

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "DIFFGEO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "diffgeo", version, about = "Geodesics, matching and curvature on diffeomorphism groups")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output files; nothing is written without it.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for randomly generated inputs; overrides the config's seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Also run the reference implementation and report the comparison.
    #[arg(long, global = true)]
    pub oracle: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a landmark geodesic from initial momenta.
    Shoot,
    /// Solve a batch of landmark matching problems.
    Match,
    /// Sectional curvature of a landmark plane.
    Curvature,
    /// Hunter-Saxton geometry on the line.
    #[command(subcommand)]
    Hs(HsCommand),
    /// Sobolev metrics on circle diffeomorphisms.
    #[command(subcommand)]
    Ea(EaCommand),
    /// Run the built-in checks with known answers.
    Selftest,
}

#[derive(Debug, Subcommand)]
pub enum HsCommand {
    /// Closed-form geodesic between two line diffeomorphisms
    Geodesic,
    /// Integrate the Hunter-Saxton equation from an initial velocity
    Evolve,
    /// Distance between two line diffeomorphisms
    Distance,
}

#[derive(Debug, Subcommand)]
pub enum EaCommand {
    /// Integrate the Euler-Arnold equation from an initial velocity
    Evolve,
    /// Sectional curvature at the identity
    Curvature,
    /// Path lengths under grid refinement for the vanishing-distance test
    Vanish,
}

/// Options that change how a command runs rather than what it computes.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunContext {
    pub seed: Option<u64>,
    pub oracle: bool,
}

impl RunContext {
    /// Command-line seed, then the config's, then zero.
    pub fn seed_or(&self, config_seed: Option<u64>) -> u64 {
        self.seed.or(config_seed).unwrap_or(0)
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Shoot => "shoot",
            Command::Match => "match",
            Command::Curvature => "curvature",
            Command::Hs(HsCommand::Geodesic) => "hs geodesic",
            Command::Hs(HsCommand::Evolve) => "hs evolve",
            Command::Hs(HsCommand::Distance) => "hs distance",
            Command::Ea(EaCommand::Evolve) => "ea evolve",
            Command::Ea(EaCommand::Curvature) => "ea curvature",
            Command::Ea(EaCommand::Vanish) => "ea vanish",
            Command::Selftest => "selftest",
        }
    }
}

fn config<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    config::load(path)
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let ctx = RunContext { seed: cli.global.seed, oracle: cli.global.oracle };
    let path = cli.global.config.as_deref();
    match &cli.command {
        Command::Shoot => landmarks::shoot(&config(path)?, &ctx),
        Command::Match => landmarks::match_problems(&config(path)?),
        Command::Curvature => landmarks::curvature(&config(path)?, &ctx),
        Command::Hs(HsCommand::Geodesic) => line::geodesic(&config(path)?),
        Command::Hs(HsCommand::Evolve) => line::evolve(&config(path)?, &ctx),
        Command::Hs(HsCommand::Distance) => line::distance(&config(path)?),
        Command::Ea(EaCommand::Evolve) => circle::evolve(&config(path)?, &ctx),
        Command::Ea(EaCommand::Curvature) => circle::curvature(&config(path)?, &ctx),
        Command::Ea(EaCommand::Vanish) => circle::vanish(&config(path)?, &ctx),
        Command::Selftest => selftest::run(),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // a pool that already exists (repeated calls in one process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values always serialize"));
}

fn fail(e: &CliError, command: Option<&str>) -> u8 {
    print_json(&e.to_json());
    if e.exit_code() == 2 {
        if let Some(example) = command.and_then(config::example) {
            eprintln!("expected a config like this (see docs/config-schema.md):\n{example}");
        }
    }
    e.exit_code()
}

/// Parse `args`, run the command, and return the process exit code:
/// 0 on success, 1 on numerical failure, 2 on usage or configuration errors.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e, None);
    }
    let name = cli.command.name();
    let mut report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => return fail(&e, Some(name)),
    };
    let failure = report.failure.take();
    if let (Some(e), Some(obj)) = (&failure, report.summary.as_object_mut()) {
        obj.insert("error".into(), e.to_json()["error"].clone());
    }
    if let Some(dir) = &cli.global.out {
        let stem = name.replace(' ', "_");
        match report.write(dir, &stem) {
            Ok(paths) => {
                for p in paths {
                    log::info!("wrote {}", p.display());
                }
            }
            Err(e) => return fail(&e, None),
        }
    }
    print_json(&report.summary);
    failure.map_or(0, |e| e.exit_code())
}
