//! `fou2`: evaluate, simulate, solve and verify the two-index fractional
//! Ornstein-Uhlenbeck process.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 numeric failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    VerifyFailed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<fou2_core::Error> for CliError {
    fn from(e: fou2_core::Error) -> Self {
        match e {
            fou2_core::Error::Capacity(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o error: {e}"))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TierArg {
    Quick,
    Full,
}

#[derive(Parser, Debug)]
#[command(name = "fou2", version, about = "Two-index fractional Ornstein-Uhlenbeck toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Verification tier; overrides the configuration.
    #[arg(long, global = true, value_enum)]
    tier: Option<TierArg>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Tabulate variance, profile, diffusion coefficient and covariances.
    Eval,
    /// Sample an ensemble of paths and summarize its variance.
    Simulate,
    /// Solve the effective Fokker-Planck equation.
    Fpe,
    /// Run the acceptance checks.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    let mut cfg = config::RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        if let Some(s) = cfg.simulate.as_mut() {
            s.seed = seed;
        }
        cfg.verify.get_or_insert_with(Default::default).seed = seed;
    }
    if let Some(t) = cli.tier {
        cfg.verify.get_or_insert_with(Default::default).tier = match t {
            TierArg::Quick => fou2_core::verify::Tier::Quick,
            TierArg::Full => fou2_core::verify::Tier::Full,
        };
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    match cli.command {
        Command::Eval => commands::eval(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Fpe => commands::fpe(&cfg, &cli.out),
        Command::Verify => commands::verify(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("usage error: {m}"),
                CliError::Numeric(m) => format!("numeric failure: {m}"),
                CliError::VerifyFailed(m) => format!("verification failed: {m}"),
            };
            eprintln!("fou2: {msg}");
            ExitCode::from(e.code())
        }
    }
}
