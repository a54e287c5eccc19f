//! Conditional volatility profile of the rate series and the fitted shift
//! that keeps rates near zero inside the level model's domain.

use std::path::PathBuf;

use clap::Args;

use levelmsm::export::columns_to_csv;
use levelmsm::market_data::{conditional_sdv, fit_shift};

use super::{load_series, merge_data, output_dir, write_text};
use crate::config::RunConfig;
use crate::{CliError, DataArgs};

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of level bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Bins with fewer observations are dropped.
    #[arg(long)]
    pub min_occupancy: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(mut cfg: RunConfig, args: PrepArgs) -> Result<(), CliError> {
    merge_data(&mut cfg, &args.data);
    if let Some(b) = args.bins {
        cfg.shift.bins = b;
    }
    if let Some(m) = args.min_occupancy {
        cfg.shift.min_occupancy = m;
    }
    let dir = output_dir(&mut cfg, &args.out)?;
    let loaded = load_series(&cfg)?;
    let profile = conditional_sdv(&loaded.series, cfg.shift.bins, cfg.shift.min_occupancy)?;
    let counts: Vec<f64> = profile.counts.iter().map(|&c| c as f64).collect();
    let csv = columns_to_csv(
        &["level", "sdv", "count"],
        &[&profile.centers, &profile.sdvs, &counts],
    )?;
    write_text(&dir.join("conditional_sdv.csv"), &csv)?;

    let fit = fit_shift(&profile)?;
    let summary = format!(
        "observations: {}\nfirst date: {}\nlast date: {}\ndropped missing: {}\n\
         bins used: {}\nsdv fit: c = {:.6}, gamma = {:.4}, shift b = {:.6}, sse = {:.6e}\n",
        loaded.series.len(),
        loaded.first_date,
        loaded.last_date,
        loaded.dropped_missing,
        profile.centers.len(),
        fit.c,
        fit.gamma,
        fit.b,
        fit.sse,
    );
    write_text(&dir.join("shift.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
