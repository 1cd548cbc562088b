//! Batch front end: identity suites, diagnostic scans and Monte Carlo runs
//! driven by one spec file each.
//!
//! Exit codes: 0 success, 1 tolerance or verdict failure, 2 usage or spec error.

mod commands;
mod error;
mod output;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::error::CliError;
use crate::output::{sha256_hex, unix_now, RunManifest, Sink};

#[derive(Debug, Parser)]
#[command(name = "gibbslab", version, about = "Finite-volume probes of disordered spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Spec file (TOML, or JSON for `.json` files).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gibbslab-out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "GIBBSLAB_THREADS")]
    threads: Option<usize>,
    /// Overrides the seed in the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized battery of exact finite-volume identities.
    VerifyIdentities,
    /// One diagnostic probe over a volume ladder.
    Scan,
    /// Monte Carlo estimates with error bars.
    Mc,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::Scan => "scan",
            Command::Mc => "mc",
        }
    }
}

fn read_spec(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let started = unix_now();
    let path = cli.spec.clone().ok_or_else(|| CliError::Usage("missing --spec PATH".into()))?;
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    let text = read_spec(&path)?;
    let mut sink = Sink::new(&cli.out)?;
    let Outcome { code, seeds } = match cli.command {
        Command::VerifyIdentities => commands::verify_identities(spec::parse(&path, &text)?, cli.seed, &mut sink)?,
        Command::Scan => commands::scan(spec::parse(&path, &text)?, cli.seed, &mut sink)?,
        Command::Mc => commands::mc(spec::parse(&path, &text)?, cli.seed, &mut sink)?,
    };
    sink.finish(RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cli.command.name().to_string(),
        spec_path: path.display().to_string(),
        spec_sha256: sha256_hex(text.as_bytes()),
        seeds,
        threads: rayon::current_num_threads(),
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: code,
        outputs: Vec::new(),
    })?;
    Ok(code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
