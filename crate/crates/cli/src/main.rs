mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shearflow::dispersion::DispersionError;
use shearflow::modes::ModeError;
use shearflow::profile::ProfileError;
use shearflow::tracer::TraceError;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "shearflow", version, about = "Water waves on monotone shear currents")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for k-parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the profile and list its inflection points.
    Check,
    /// Singular neutral modes: k_minus, k_C, F0 and the set S.
    Neutral,
    /// Trace eigenvalue branches over `trace.k_min..trace.k_max`.
    Trace,
    /// Count and locate modes at each `census.k_list` entry.
    Census,
    /// Tabulate the dispersion function on a grid of wave speeds.
    Scan,
    /// Run the consistency checks and report pass or fail.
    Verify,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid profile: {0}")]
    Profile(#[from] ProfileError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0} check(s) failed")]
    Verification(usize),
}

impl From<ModeError> for CliError {
    fn from(e: ModeError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DispersionError> for CliError {
    fn from(e: DispersionError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Profile(_) => 2,
            CliError::Numerical(_) | CliError::Io(..) => 3,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.clone().unwrap_or_else(|| PathBuf::from("shearflow.toml"));
    let mut config = RunConfig::load(&path)?;
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Check => commands::check(&config),
        Command::Neutral => commands::neutral(&config),
        Command::Trace => commands::trace(&config),
        Command::Census => commands::census(&config),
        Command::Scan => commands::scan(&config),
        Command::Verify => {
            let lines = verify::verify(&config)?;
            commands::write_file(&config.output.dir, "verify.csv", &verify::to_csv(&lines))?;
            commands::write_file(&config.output.dir, "effective_config.toml", &config.to_toml())?;
            let width = lines.iter().map(|l| l.name.len()).max().unwrap_or(0);
            for line in &lines {
                let status = if line.passed { "PASS" } else { "FAIL" };
                println!("{:<width$}  {status}  {}", line.name, line.detail);
            }
            let failed = lines.iter().filter(|l| !l.passed).count();
            if failed > 0 {
                return Err(CliError::Verification(failed));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
