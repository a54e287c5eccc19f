//! Estimates or evaluates a set of models on one series and writes a report,
//! the per-observation log-densities and the formatted tables.

use std::path::{Path, PathBuf};

use clap::Args;

use levelmsm::export::columns_to_csv;
use levelmsm::fitting::FitReport;
use levelmsm::garch::VarianceInit;
use levelmsm::models::{
    evaluate_model, fit_model, pilot_fit, EvalOptions, FitSettings, ModelKind, ModelSpec, Scales,
};
use levelmsm::selection::{vuong_hac, Candidate, VuongReport};
use levelmsm::LogDensities;

use super::{merge_data, model_ids, output_dir, prepare, require_seed, write_text};
use crate::config::{RunConfig, ShiftMode, VarianceInitConfig};
use crate::tables::{comparison_table, estimate_tables, footer};
use crate::{CliError, DataArgs};

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model ids, comma separated: cev-normal, cev-t, msm<K>, garch, egarch,
    /// jump, each optionally with a -linear suffix.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Fit every model with a linear drift.
    #[arg(long)]
    pub linear_drift: bool,
    /// Seed for the Latin-hypercube starts.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Shift added to every rate before fitting.
    #[arg(long, conflicts_with = "fit_shift")]
    pub shift: Option<f64>,
    /// Fit the shift from the conditional volatility profile.
    #[arg(long)]
    pub fit_shift: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn apply_flags(cfg: &mut RunConfig, args: &FitArgs) {
    merge_data(cfg, &args.data);
    if !args.models.is_empty() {
        cfg.fit.models = args.models.clone();
    }
    if args.linear_drift {
        cfg.fit.linear_drift = true;
    }
    if args.seed.is_some() {
        cfg.fit.seed = args.seed;
    }
    if let Some(s) = args.starts {
        cfg.fit.starts = s;
    }
    if let Some(r) = args.restarts {
        cfg.fit.restarts = r;
    }
    if let Some(m) = args.max_iter {
        cfg.fit.max_iter = m;
    }
    if let Some(v) = args.shift {
        cfg.shift.mode = ShiftMode::Fixed;
        cfg.shift.value = v;
    }
    if args.fit_shift {
        cfg.shift.mode = ShiftMode::Fit;
    }
}

/// Default start box with the configured per-parameter overrides.
fn start_box(
    cfg: &RunConfig,
    id: &str,
    spec: &ModelSpec,
    series: &levelmsm::market_data::RateSeries,
) -> Result<Option<Vec<(f64, f64)>>, CliError> {
    let Some(overrides) = cfg.start_box.get(id) else {
        return Ok(None);
    };
    let pilot = pilot_fit(series, spec.linear_drift)?;
    let mut bx = spec.start_box(&pilot, &Scales::from_series(series));
    let names = spec.param_names();
    for (name, [lo, hi]) in overrides {
        let i = names.iter().position(|n| n == name).ok_or_else(|| {
            CliError::config(format!("start_box.{id}: {id} has no parameter `{name}` (has {})", names.join(", ")))
        })?;
        if !(lo < hi) {
            return Err(CliError::config(format!("start_box.{id}.{name}: need lower < upper")));
        }
        bx[i] = (*lo, *hi);
    }
    Ok(Some(bx))
}

fn logf_csv(report: &FitReport) -> Result<String, CliError> {
    let t: Vec<f64> = (0..report.log_densities.len())
        .map(|i| (report.first_index + i) as f64)
        .collect();
    Ok(columns_to_csv(&["t", "log_density"], &[&t, &report.log_densities])?)
}

fn densities(report: &FitReport) -> LogDensities {
    LogDensities::new(report.first_index, report.log_densities.clone())
}

/// Vuong statistics of every MSM order against the highest one.
fn msm_ladder(fitted: &[(ModelSpec, FitReport)], lag: Option<usize>) -> Result<Vec<(usize, VuongReport)>, CliError> {
    let levels = |s: &ModelSpec| match s.kind {
        ModelKind::Msm { levels } => Some(levels),
        _ => None,
    };
    let Some((top_spec, top)) = fitted
        .iter()
        .filter(|(s, _)| levels(s).is_some())
        .max_by_key(|(s, _)| levels(s))
    else {
        return Ok(Vec::new());
    };
    let top_d = densities(top);
    let mut out = Vec::new();
    for (spec, r) in fitted {
        let Some(k) = levels(spec) else { continue };
        if spec == top_spec || spec.linear_drift != top_spec.linear_drift {
            continue;
        }
        let d = densities(r);
        let v = vuong_hac(Candidate::new(&top_d, top.dim()), Candidate::new(&d, r.dim()), lag)?;
        out.push((k, v));
    }
    Ok(out)
}

pub fn run(mut cfg: RunConfig, args: FitArgs) -> Result<(), CliError> {
    apply_flags(&mut cfg, &args);
    let ids = model_ids(&cfg.fit.models, cfg.fit.linear_drift);
    if ids.is_empty() {
        return Err(CliError::config("no models: pass --models or set fit.models"));
    }
    let specs = ids
        .iter()
        .map(|id| id.parse::<ModelSpec>().map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    for key in cfg.evaluate.keys().chain(cfg.warm_start.keys()).chain(cfg.start_box.keys()) {
        if !ids.contains(key) {
            log::warn!("configuration section for `{key}` does not match any requested model");
        }
    }
    let all_evaluated = ids.iter().all(|id| cfg.evaluate.contains_key(id));
    let seed = if all_evaluated {
        cfg.fit.seed
    } else {
        Some(require_seed(cfg.fit.seed, "fitting")?)
    };

    let dir = output_dir(&mut cfg, &args.out)?;
    let prepared = prepare(&cfg)?;
    let series = &prepared.series;
    log::info!(
        "{} levels from {} to {}, shift {}",
        series.len(),
        prepared.loaded.first_date,
        prepared.loaded.last_date,
        prepared.shift
    );
    write_text(&dir.join("run.toml"), &cfg.to_toml())?;
    let hash = cfg.hash();

    let base = FitSettings {
        starts: cfg.fit.starts,
        seed: seed.unwrap_or(0),
        restarts: cfg.fit.restarts,
        eval: EvalOptions {
            variance_init: match cfg.fit.variance_init {
                VarianceInitConfig::Sample => VarianceInit::SampleVariance,
                VarianceInitConfig::Unconditional => VarianceInit::Unconditional,
            },
            max_levels: cfg.fit.max_levels,
        },
        ..FitSettings::default()
    };

    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for (id, spec) in ids.iter().zip(&specs) {
        let mut settings = base.clone();
        settings.simplex.max_iter = cfg.fit.max_iter;
        settings.warm_starts = cfg.warm_start.get(id).cloned().unwrap_or_default();
        for w in &settings.warm_starts {
            if w.len() != spec.dim() {
                return Err(CliError::config(format!(
                    "warm_start.{id}: expected {} values, got {}",
                    spec.dim(),
                    w.len()
                )));
            }
        }
        settings.start_box = start_box(&cfg, id, spec, series)?;
        let outcome = match cfg.evaluate.get(id) {
            Some(theta) => {
                log::info!("evaluating {id}");
                evaluate_model(spec, series, theta, &settings)
            }
            None => {
                log::info!("fitting {id}");
                fit_model(spec, series, &settings)
            }
        };
        let report = match outcome {
            Ok(r) => r,
            Err(e) => {
                log::error!("{id}: {e}");
                failures.push(CliError::from(e));
                continue;
            }
        };
        for d in &report.diagnostics {
            log::warn!("{id}: {d}");
        }
        write_report(&dir, id, &report)?;
        if !report.converged {
            failures.push(CliError::convergence(format!("{id} did not converge")));
        }
        fitted.push((*spec, report));
    }

    let mut text = String::new();
    let ladder = msm_ladder(&fitted, cfg.vuong.hac_lag)?;
    for t in estimate_tables(&fitted, &ladder) {
        text.push_str(&t.render());
        text.push('\n');
    }
    if let Some(reference) = &cfg.vuong.reference {
        match fitted.iter().find(|(s, _)| &s.id() == reference) {
            Some((_, r)) => {
                let rd = densities(r);
                let mut others = Vec::new();
                for (s, o) in fitted.iter().filter(|(s, _)| &s.id() != reference) {
                    let od = densities(o);
                    let v = vuong_hac(Candidate::new(&rd, r.dim()), Candidate::new(&od, o.dim()), cfg.vuong.hac_lag)?;
                    others.push((s.id(), o.clone(), v));
                }
                text.push_str(&comparison_table((reference, r), &others).render());
                text.push('\n');
            }
            None => log::warn!("Vuong reference `{reference}` was not fitted"),
        }
    }
    if prepared.shift != 0.0 {
        let how = match &prepared.shift_fit {
            Some(f) => format!("fitted, sdv elasticity {:.4}", f.gamma),
            None => "fixed".into(),
        };
        text.push_str(&format!("rates shifted by {} ({how})\n", prepared.shift));
    }
    text.push_str(&footer(&hash, seed));
    write_text(&dir.join("tables.txt"), &text)?;
    print!("{text}");

    match failures.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_report(dir: &Path, id: &str, report: &FitReport) -> Result<(), CliError> {
    write_text(&dir.join(format!("{id}.fit.txt")), &report.to_text())?;
    write_text(&dir.join(format!("{id}.logf.csv")), &logf_csv(report)?)
}
