//! `fcs`: full counting statistics of work and heat from a run configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fcs_core::FcsError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
    /// A fluctuation-relation gate did not hold.
    Gate(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) | Failure::Gate(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Gate(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<FcsError> for Failure {
    fn from(e: FcsError) -> Self {
        match e {
            FcsError::Numerical(_)
            | FcsError::Normalization(_)
            | FcsError::DegenerateKernel { .. }
            | FcsError::ZeroIntensity => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "fcs", version, about = "Counting statistics of work and heat in driven open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CrooksSource {
    Work,
    Heat,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Fixed integrator step, overriding the config.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Work and heat distributions, moments and fluctuation checks.
    Simulate(Common),
    /// Long-time cumulants of a static model.
    Longtime(Common),
    /// Fano-factor grid for the coupled qubits.
    Sweep(Common),
    /// Second-order emission correlation.
    G2(Common),
    /// Fluctuation-relation gates; nonzero exit on any failure.
    CheckFt {
        #[command(flatten)]
        common: Common,
        /// Distribution fed to the Crooks gate.
        #[arg(long, value_enum, default_value = "work")]
        crooks_source: CrooksSource,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Longtime(c) | Command::Sweep(c) | Command::G2(c) => c,
        Command::CheckFt { common, .. } => common,
    };
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(dt) = common.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
    }
    let ctx = commands::Context::new(&common.config, &common.out, common.dt)?;
    match &cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Longtime(_) => commands::longtime(&ctx),
        Command::Sweep(_) => commands::sweep(&ctx),
        Command::G2(_) => commands::g2(&ctx),
        Command::CheckFt { crooks_source, .. } => commands::check_ft(&ctx, *crooks_source),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fcs: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
