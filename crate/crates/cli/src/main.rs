//! `levelmsm` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand};

use levelmsm::Error;

/// Exit codes.
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONVERGENCE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InsufficientData(_)
            | Error::NonPositiveLevel { .. }
            | Error::DegenerateObservation { .. } => EXIT_INPUT,
            Error::Optimizer(_) | Error::Numerical(_) => EXIT_CONVERGENCE,
            Error::InvalidParameter(_) | Error::StateSpaceTooLarge { .. } => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "levelmsm", version, about = "Multifractal short-rate models: fit, compare, simulate")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Treat warnings as errors (exit code 4).
    #[arg(long, global = true)]
    pub strict: bool,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

/// Data source flags shared by commands that read a rate series.
#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Input CSV with a date column and a rate column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Date column: zero-based index or header name.
    #[arg(long)]
    pub date_column: Option<String>,
    /// Rate column: zero-based index or header name.
    #[arg(long)]
    pub rate_column: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional volatility profile and zero-rate shift fit.
    Prep(commands::prep::PrepArgs),
    /// Estimate (or evaluate) models and write reports and tables.
    Fit(commands::fit::FitArgs),
    /// Vuong comparison of fitted models against a reference.
    Compare(commands::compare::CompareArgs),
    /// Simulate a level path from any model.
    Simulate(commands::simulate::SimulateArgs),
    /// Build a multiplicative cascade measure and its MMAR path.
    Cascade(commands::cascade::CascadeArgs),
    /// Structure functions and scaling exponents.
    Scaling(commands::scaling::ScalingArgs),
    /// Autocorrelation of raw and normalized increments.
    Acf(commands::acf::AcfArgs),
}

static WARNINGS: AtomicUsize = AtomicUsize::new(0);

/// Forwards to env_logger and counts warnings so `--strict` can fail on them.
struct CountingLogger(env_logger::Logger);

impl log::Log for CountingLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn || self.0.enabled(metadata)
    }

    fn log(&self, record: &log::Record) {
        if record.level() == log::Level::Warn {
            WARNINGS.fetch_add(1, Ordering::SeqCst);
        }
        if self.0.enabled(record.metadata()) {
            self.0.log(record);
        }
    }

    fn flush(&self) {
        self.0.flush();
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let inner = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .build();
    let max = inner.filter().max(log::LevelFilter::Warn);
    if log::set_boxed_logger(Box::new(CountingLogger(inner))).is_ok() {
        log::set_max_level(max);
    }
}

pub fn warnings_logged() -> usize {
    WARNINGS.load(Ordering::SeqCst)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let base = match &cli.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    let outcome = match cli.command {
        Command::Prep(a) => commands::prep::run(base, a),
        Command::Fit(a) => commands::fit::run(base, a),
        Command::Compare(a) => commands::compare::run(base, a),
        Command::Simulate(a) => commands::simulate::run(base, a),
        Command::Cascade(a) => commands::cascade::run(base, a),
        Command::Scaling(a) => commands::scaling::run(base, a),
        Command::Acf(a) => commands::acf::run(base, a),
    };
    outcome?;
    if cli.strict && warnings_logged() > 0 {
        return Err(CliError::config(format!(
            "{} warning(s) raised and --strict is set",
            warnings_logged()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
