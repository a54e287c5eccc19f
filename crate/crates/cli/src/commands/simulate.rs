//! Simulated level paths from any registered model.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use levelmsm::models::{simulate_model, ModelSpec};

use super::{require_seed, write_text};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model id, e.g. msm5-linear.
    #[arg(long)]
    pub model: String,
    /// Parameters in the model's order, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub params: Vec<f64>,
    /// Initial level.
    #[arg(long)]
    pub r1: f64,
    /// Number of simulated steps.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Date of the first level; later levels follow on consecutive days.
    #[arg(long, default_value = "2000-01-01")]
    pub start_date: chrono::NaiveDate,
    /// CSV output (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cfg: RunConfig, args: SimulateArgs) -> Result<(), CliError> {
    let seed = require_seed(args.seed.or(cfg.fit.seed), "simulation")?;
    let spec: ModelSpec = args.model.parse()?;
    if args.params.len() != spec.dim() {
        return Err(CliError::config(format!(
            "{} takes {} parameters ({}), got {}",
            spec.id(),
            spec.dim(),
            spec.param_names().join(", "),
            args.params.len()
        )));
    }
    let sim = simulate_model(&spec, &args.params, args.r1, args.n, seed)?;
    if sim.truncated {
        log::warn!("the path left the positive half-line and was truncated");
    }
    if sim.redraws > 0 {
        log::info!("{} innovations redrawn to keep levels positive", sim.redraws);
    }
    let mut csv = String::from("date,rate\n");
    for (day, r) in args.start_date.iter_days().zip(sim.series.values()) {
        let _ = writeln!(csv, "{day},{r}");
    }
    match &args.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
