//! Vuong comparison of saved fits against a reference model.

use std::path::{Path, PathBuf};

use clap::Args;

use levelmsm::fitting::FitReport;
use levelmsm::selection::{vuong_hac, Candidate};
use levelmsm::LogDensities;

use super::{model_ids, write_text};
use crate::config::RunConfig;
use crate::tables::{comparison_table, footer};
use crate::CliError;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory holding `<id>.fit.txt` and `<id>.logf.csv` files.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Models to compare (default: every fit in the directory).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Reference model id.
    #[arg(long)]
    pub reference: Option<String>,
    /// Newey-West lag (default floor(4 (m/100)^(2/9))).
    #[arg(long)]
    pub hac_lag: Option<usize>,
    /// Table output file (default `<dir>/comparison.txt`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Parses a `t,log_density` file into aligned densities.
pub fn read_logf(path: &Path) -> Result<LogDensities, CliError> {
    let text = read(path)?;
    let mut first = None;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::input(format!("{}: line {}: expected `t,log_density`", path.display(), i + 1));
        let (t, v) = line.split_once(',').ok_or_else(bad)?;
        let t: usize = t.trim().parse::<f64>().map_err(|_| bad())? as usize;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        let expected = first.map_or(t, |f: usize| f + values.len());
        if t != expected {
            return Err(CliError::input(format!(
                "{}: line {}: index {t} breaks the consecutive sequence",
                path.display(),
                i + 1
            )));
        }
        first.get_or_insert(t);
        values.push(v);
    }
    let first = first.ok_or_else(|| CliError::input(format!("{} holds no log-densities", path.display())))?;
    Ok(LogDensities::new(first, values))
}

struct Saved {
    id: String,
    report: FitReport,
    densities: LogDensities,
}

fn load(dir: &Path, id: &str) -> Result<Saved, CliError> {
    let report_path = dir.join(format!("{id}.fit.txt"));
    let report = FitReport::from_text(&read(&report_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", report_path.display())))?;
    let densities = read_logf(&dir.join(format!("{id}.logf.csv")))?;
    if densities.len() != report.n_obs || densities.first_index != report.first_index {
        return Err(CliError::input(format!(
            "{id}: log-density file does not match its report ({} values from {} vs {} from {})",
            densities.len(),
            densities.first_index,
            report.n_obs,
            report.first_index
        )));
    }
    Ok(Saved { id: id.to_string(), report, densities })
}

fn discover(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(format!("cannot read {}: {e}", dir.display())))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix(".fit.txt").map(String::from))
        .collect();
    ids.sort();
    Ok(ids)
}

pub fn run(cfg: RunConfig, args: CompareArgs) -> Result<(), CliError> {
    let dir = args.dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let reference = args
        .reference
        .clone()
        .or_else(|| cfg.vuong.reference.clone())
        .ok_or_else(|| CliError::config("no reference model: pass --reference or set vuong.reference"))?;
    let hac_lag = args.hac_lag.or(cfg.vuong.hac_lag);
    let mut ids = model_ids(&args.models, false);
    if ids.is_empty() {
        ids = discover(&dir)?;
        ids.retain(|id| id != &reference);
    }

    let r = load(&dir, &reference)?;
    let others = ids.iter().map(|id| load(&dir, id)).collect::<Result<Vec<_>, _>>()?;
    for o in &others {
        let end_gap = o.densities.end_index() != r.densities.end_index();
        let start_gap = o.densities.first_index.abs_diff(r.densities.first_index) > 1;
        if end_gap || start_gap {
            return Err(CliError::input(format!(
                "{} covers observations {}..{} but {} covers {}..{}; were they fitted on the same series?",
                o.id,
                o.densities.first_index,
                o.densities.end_index(),
                r.id,
                r.densities.first_index,
                r.densities.end_index()
            )));
        }
    }

    let mut rows = Vec::new();
    for o in others {
        let v = vuong_hac(
            Candidate::new(&r.densities, r.report.dim()),
            Candidate::new(&o.densities, o.report.dim()),
            hac_lag,
        )?;
        if v.degenerate {
            log::warn!("{}: log-density differences have zero variance", o.id);
        }
        rows.push((o.id, o.report, v));
    }
    let mut text = comparison_table((&reference, &r.report), &rows).render();
    text.push_str(&footer(&cfg.hash(), cfg.fit.seed));
    let out = args.out.unwrap_or_else(|| dir.join("comparison.txt"));
    write_text(&out, &text)?;
    print!("{text}");
    Ok(())
}
