//! Batch front end for the `wnk` library: one JSON config, five experiment
//! commands, `report.json` and `table.csv` in the output directory.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{run_command, Assertion, Outcome};
pub use config::{ConfigError, Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "WNK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Convergence of the random-walk functional to white noise.
    Donsker,
    /// Equicontinuity modulus scan over an (m, delta) grid.
    Tightness,
    /// Fubini identity, M constant and Gram positivity checks.
    Minlos,
    /// Exhaustion index of white-noise samples.
    Hemicompact,
    /// Reference tables: Hermite values, Gauss-Hermite rules, embedding norms.
    Tables,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Donsker => "donsker",
            Command::Tightness => "tightness",
            Command::Minlos => "minlos",
            Command::Hemicompact => "hemicompact",
            Command::Tables => "tables",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wnk", version, about = "White-noise measure experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated n schedule, e.g. `--n 16,64,256`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    /// Monte-Carlo replicate count.
    #[arg(long, global = true)]
    pub mc: Option<usize>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            n_schedule: self.n.clone(),
            n_mc: self.mc,
        }
    }

    pub fn load_config(&self) -> Result<RunConfig, ConfigError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(base.apply(&self.overrides()))
    }
}

fn thread_cap() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Validates, runs and writes the outputs; returns the process exit status.
pub fn execute(command: Command, cfg: &RunConfig) -> i32 {
    let threads = match thread_cap().and_then(|t| cfg.validate(command).map(|_| t)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("wnk {}: config error: {e}", command.name());
            return EXIT_CONFIG;
        }
    };
    let outcome = match wnk::par::with_threads(threads, || run_command(command, cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("wnk {}: {e:#}", command.name());
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = outcome.write(cfg) {
        eprintln!("wnk {}: {e:#}", command.name());
        return EXIT_RUNTIME;
    }
    let failed: Vec<&Assertion> = outcome.assertions.iter().filter(|a| !a.passed).collect();
    for a in &failed {
        eprintln!("assertion failed: {}: {}", a.name, a.detail);
    }
    if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match cli.load_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("wnk {}: config error: {e}", cli.command.name());
            return EXIT_CONFIG;
        }
    };
    execute(cli.command, &cfg)
}
