//! Structure functions and scaling exponents, for a rate series or for
//! simulated realizations of a construction.

use std::path::PathBuf;

use clap::Args;

use levelmsm::cascades::{discretize_to_msm, mmar_compose};
use levelmsm::export::columns_to_csv;
use levelmsm::scaling::{log_spaced_lags, structure_functions, zeta_fit, ScaleRange, StructureFunctionTable};

use super::{load_series, merge_data, output_dir, require_seed, write_text, Construction, ConstructionArgs};
use crate::config::RunConfig;
use crate::{CliError, DataArgs};

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// With --construction, simulated realizations replace the input series.
    #[command(flatten)]
    pub construction: ConstructionArgs,
    /// Independent realizations whose structure functions are averaged.
    #[arg(long, default_value_t = 20)]
    pub realizations: usize,
    /// Cells of the regridded measure.
    #[arg(long, default_value_t = 4096)]
    pub cells: usize,
    /// Moments, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3,4")]
    pub q: Vec<f64>,
    /// Smallest lag of the fit range.
    #[arg(long, default_value_t = 1)]
    pub min_lag: usize,
    /// Largest lag of the fit range.
    #[arg(long, default_value_t = 10)]
    pub max_lag: usize,
    /// Log-spaced lags in the table.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(mut cfg: RunConfig, args: ScalingArgs) -> Result<(), CliError> {
    if args.min_lag == 0 || args.min_lag > args.max_lag {
        return Err(CliError::config("need 1 <= min-lag <= max-lag"));
    }
    let range = ScaleRange::new(args.min_lag, args.max_lag);
    let lags = log_spaced_lags(args.min_lag, args.max_lag, args.points);
    let dir = output_dir(&mut cfg, &args.out)?;

    let (table, analytic, horizon) = match args.construction.construction {
        None => {
            merge_data(&mut cfg, &args.data);
            let loaded = load_series(&cfg)?;
            let table = structure_functions(loaded.series.values(), &lags, &args.q)?;
            (table, None, None)
        }
        Some(kind) => {
            let c = &args.construction;
            let seed = require_seed(args.seed.or(cfg.fit.seed), "simulated scaling")?;
            if args.realizations == 0 {
                return Err(CliError::config("need at least one realization"));
            }
            let mut tables = Vec::with_capacity(args.realizations);
            let mut steps = 0;
            for rep in 0..args.realizations as u64 {
                let s = seed.wrapping_add(rep.wrapping_mul(0x9E37_79B9));
                let path = if kind == Construction::Msm {
                    let x = discretize_to_msm(&c.discretization()?, c.n, s)?.x;
                    std::iter::once(0.0)
                        .chain(x.iter().scan(0.0, |acc, v| {
                            *acc += v;
                            Some(*acc)
                        }))
                        .collect::<Vec<_>>()
                } else {
                    let m = c.measure(s)?.regrid(args.cells)?;
                    mmar_compose(&m, c.sigma, s.wrapping_add(1))?.values
                };
                steps = path.len() - 1;
                tables.push(structure_functions(&path, &lags, &args.q)?);
            }
            let table = StructureFunctionTable::average(&tables)?;
            let scaling = c.scaling_function()?;
            let analytic: Vec<f64> = args.q.iter().map(|&q| scaling.zeta(q)).collect();
            (table, Some(analytic), Some(c.horizon_steps(steps)))
        }
    };

    if let Some(w) = horizon.and_then(|h| range.horizon_warning(h)) {
        log::warn!("{w}");
    }
    let estimates = zeta_fit(&table, range)?;
    let qs: Vec<f64> = estimates.iter().map(|e| e.q).collect();
    let zeta: Vec<f64> = estimates.iter().map(|e| e.zeta).collect();
    let se: Vec<f64> = estimates.iter().map(|e| e.std_error).collect();
    let csv = match &analytic {
        Some(a) => {
            let gap: Vec<f64> = zeta.iter().zip(a).map(|(z, t)| z - t).collect();
            let max_gap = gap.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            println!("largest |estimate - theory|: {max_gap:.4}");
            columns_to_csv(&["q", "zeta", "std_error", "theory", "gap"], &[&qs, &zeta, &se, a, &gap])?
        }
        None => columns_to_csv(&["q", "zeta", "std_error"], &[&qs, &zeta, &se])?,
    };
    write_text(&dir.join("zeta.csv"), &csv)?;

    let mut sf_headers = vec!["lag".to_string()];
    sf_headers.extend(table.qs.iter().map(|q| format!("S_{q}")));
    let headers: Vec<&str> = sf_headers.iter().map(String::as_str).collect();
    let lag_col: Vec<f64> = table.lags.iter().map(|&l| l as f64).collect();
    let mut cols: Vec<&[f64]> = vec![&lag_col];
    cols.extend(table.values.iter().map(Vec::as_slice));
    write_text(&dir.join("structure_functions.csv"), &columns_to_csv(&headers, &cols)?)?;
    print!("{csv}");
    Ok(())
}
