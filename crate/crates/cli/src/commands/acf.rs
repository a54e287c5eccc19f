//! Sample autocorrelations of raw increments, level-normalized increments and
//! their absolute values.

use std::path::PathBuf;

use clap::Args;

use levelmsm::export::columns_to_csv;
use levelmsm::market_data::{normalized_increments, sample_acf};
use levelmsm::models::pilot_fit;

use super::{merge_data, output_dir, prepare, write_text};
use crate::config::RunConfig;
use crate::{CliError, DataArgs};

#[derive(Debug, Args)]
pub struct AcfArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub max_lag: usize,
    /// Level elasticity used to normalize increments (default: CEV-normal
    /// estimate).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Drift intercept removed before normalizing (default: CEV-normal
    /// estimate).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha0: Option<f64>,
    /// Drift slope removed before normalizing.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(mut cfg: RunConfig, args: AcfArgs) -> Result<(), CliError> {
    merge_data(&mut cfg, &args.data);
    let dir = output_dir(&mut cfg, &args.out)?;
    let series = prepare(&cfg)?.series;

    let (alpha0, alpha1, gamma) = match (args.alpha0, args.gamma) {
        (Some(a0), Some(g)) => (a0, args.alpha1.unwrap_or(0.0), g),
        _ => {
            let pilot = pilot_fit(&series, args.alpha1.is_some())?;
            (
                args.alpha0.unwrap_or(pilot.alpha0),
                args.alpha1.unwrap_or(pilot.alpha1),
                args.gamma.unwrap_or(pilot.gamma),
            )
        }
    };
    log::info!("normalizing with alpha0 = {alpha0}, alpha1 = {alpha1}, gamma = {gamma}");

    let raw = series.increments().values;
    let normalized = normalized_increments(&series, alpha0, alpha1, gamma)?;
    let absolute: Vec<f64> = normalized.iter().map(|v| v.abs()).collect();
    let raw_acf = sample_acf(&raw, args.max_lag)?;
    let norm_acf = sample_acf(&normalized, args.max_lag)?;
    let abs_acf = sample_acf(&absolute, args.max_lag)?;

    let lags: Vec<f64> = (1..=raw_acf.values.len()).map(|l| l as f64).collect();
    let band = vec![raw_acf.band; lags.len()];
    let csv = columns_to_csv(
        &["lag", "raw", "normalized", "abs_normalized", "band"],
        &[&lags, &raw_acf.values, &norm_acf.values, &abs_acf.values, &band],
    )?;
    write_text(&dir.join("acf.csv"), &csv)?;
    let outside = |v: &[f64]| v.iter().filter(|a| a.abs() > raw_acf.band).count();
    println!(
        "lags: {}\n95% band: +/-{:.4}\noutside band: raw {}, normalized {}, |normalized| {}",
        lags.len(),
        raw_acf.band,
        outside(&raw_acf.values),
        outside(&norm_acf.values),
        outside(&abs_acf.values)
    );
    Ok(())
}
