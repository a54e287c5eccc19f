pub mod acf;
pub mod cascade;
pub mod compare;
pub mod fit;
pub mod prep;
pub mod scaling;
pub mod simulate;

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use levelmsm::cascades::{
    badic_cascade, badic_scaling, dyadic_bernoulli, dyadic_scaling, poisson_multifractal,
    poisson_scaling, CutRule, Discretization, MeasureRealization, MultiplierLaw, ScalingFunction,
};
use levelmsm::export::write_atomic;
use levelmsm::market_data::{
    conditional_sdv, fit_shift, load_csv, CsvSpec, LoadedSeries, RateSeries, ShiftFit,
};

use crate::config::{RunConfig, ShiftMode};
use crate::{CliError, DataArgs};

/// Applies data flags on top of the configuration file.
pub fn merge_data(cfg: &mut RunConfig, data: &DataArgs) {
    if let Some(p) = &data.input {
        cfg.data.input = Some(p.clone());
    }
    if let Some(c) = &data.date_column {
        cfg.data.date_column = c.clone();
    }
    if let Some(c) = &data.rate_column {
        cfg.data.rate_column = c.clone();
    }
}

/// Series as read, plus the version the models see after the zero-rate
/// shift.
pub struct Prepared {
    pub loaded: LoadedSeries,
    pub series: RateSeries,
    pub shift: f64,
    pub shift_fit: Option<ShiftFit>,
}

pub fn load_series(cfg: &RunConfig) -> Result<LoadedSeries, CliError> {
    let path = cfg
        .data
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("no input series: pass --input or set data.input"))?;
    let spec = CsvSpec {
        date_column: cfg.data.date_column.parse().expect("infallible"),
        rate_column: cfg.data.rate_column.parse().expect("infallible"),
    };
    let loaded = load_csv(path, &spec)?;
    if loaded.dropped_missing > 0 {
        log::info!("{}: dropped {} missing rows", path.display(), loaded.dropped_missing);
    }
    Ok(loaded)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let loaded = load_series(cfg)?;
    let (shift, shift_fit) = match cfg.shift.mode {
        ShiftMode::None => (0.0, None),
        ShiftMode::Fixed => (cfg.shift.value, None),
        ShiftMode::Fit => {
            let profile = conditional_sdv(&loaded.series, cfg.shift.bins, cfg.shift.min_occupancy)?;
            let f = fit_shift(&profile)?;
            log::info!("fitted shift b = {:.6} (gamma {:.4})", f.b, f.gamma);
            (f.b, Some(f))
        }
    };
    let series = if shift == 0.0 {
        loaded.series.clone()
    } else {
        loaded.series.apply_shift(shift)?
    };
    Ok(Prepared { loaded, series, shift, shift_fit })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Output directory from a flag or the configuration.
pub fn output_dir(cfg: &mut RunConfig, flag: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    if let Some(d) = flag {
        cfg.output.dir = d.clone();
    }
    ensure_dir(&cfg.output.dir)?;
    Ok(cfg.output.dir.clone())
}

pub fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::config(format!("{what} needs a seed: pass --seed or set fit.seed")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    /// Randomized dyadic Bernoulli measure.
    Dyadic,
    /// b-adic cascade.
    Badic,
    /// Poisson multifractal measure.
    Poisson,
    /// Discrete-time MSM innovations from the geometric-time construction.
    Msm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawKind {
    /// Two-point law {m0, 2 - m0}.
    Binomial,
    /// Log-normal law with log-scale --spread.
    Lognormal,
}

/// Parameters of a cascade construction.
#[derive(Debug, Clone, Args)]
pub struct ConstructionArgs {
    /// Construction to simulate.
    #[arg(long, value_enum)]
    pub construction: Option<Construction>,
    /// Mass fraction of the dyadic Bernoulli measure.
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    /// Branching number (b-adic, Poisson) or frequency growth (MSM).
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, value_enum, default_value_t = LawKind::Binomial)]
    pub law: LawKind,
    /// High value of the binomial multiplier, normalized to mean 1.
    #[arg(long, default_value_t = 1.4)]
    pub m0: f64,
    /// Log-scale of the log-normal multiplier.
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    /// Cascade depth (dyadic, b-adic) or number of levels (Poisson, MSM).
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Poisson cut rate of the coarsest level.
    #[arg(long, default_value_t = 2.0)]
    pub l1: f64,
    /// Switching probability of the fastest MSM level.
    #[arg(long, default_value_t = 0.5)]
    pub lambda_k: f64,
    /// MSM renewal rule.
    #[arg(long, value_enum, default_value_t = CutChoice::Nested)]
    pub cut: CutChoice,
    /// Horizon of the measure.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Volatility of the composed path.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Length of MSM paths.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutChoice {
    Nested,
    Independent,
}

impl ConstructionArgs {
    pub fn kind(&self) -> Result<Construction, CliError> {
        self.construction
            .ok_or_else(|| CliError::config("pass --construction dyadic|badic|poisson|msm"))
    }

    /// Multiplier law with the given mean.
    pub fn law(&self, mean: f64) -> Result<MultiplierLaw, CliError> {
        let law = match self.law {
            LawKind::Binomial => match MultiplierLaw::binomial(self.m0)? {
                MultiplierLaw::TwoPoint { low, high } => MultiplierLaw::TwoPoint {
                    low: low * mean,
                    high: high * mean,
                },
                other => other,
            },
            LawKind::Lognormal => MultiplierLaw::lognormal_with_mean(mean, self.spread)?,
        };
        Ok(law)
    }

    fn branching(&self) -> Result<usize, CliError> {
        if self.b.fract() != 0.0 || self.b < 2.0 {
            return Err(CliError::config(format!("b-adic cascades need an integer b >= 2, got {}", self.b)));
        }
        Ok(self.b as usize)
    }

    /// Measure realization for the cascade constructions.
    pub fn measure(&self, seed: u64) -> Result<MeasureRealization, CliError> {
        let m = match self.kind()? {
            Construction::Dyadic => dyadic_bernoulli(self.p, self.depth, self.horizon, seed)?,
            Construction::Badic => {
                let b = self.branching()?;
                badic_cascade(b, &self.law(1.0 / b as f64)?, self.depth, self.horizon, seed)?
            }
            Construction::Poisson => {
                poisson_multifractal(self.b, self.l1, &self.law(1.0)?, self.depth, self.horizon, seed)?
            }
            Construction::Msm => {
                return Err(CliError::config("the msm construction produces innovations, not a measure"))
            }
        };
        Ok(m)
    }

    pub fn discretization(&self) -> Result<Discretization, CliError> {
        Ok(Discretization {
            growth: self.b,
            lambda_top: self.lambda_k,
            levels: self.depth,
            law: self.law(1.0)?,
            sigma: self.sigma,
            cut_rule: match self.cut {
                CutChoice::Nested => CutRule::Nested,
                CutChoice::Independent => CutRule::Independent,
            },
        })
    }

    /// Theoretical scaling function of the construction.
    pub fn scaling_function(&self) -> Result<ScalingFunction, CliError> {
        Ok(match self.kind()? {
            Construction::Dyadic => dyadic_scaling(self.p)?,
            Construction::Badic => {
                let b = self.branching()?;
                badic_scaling(b, self.law(1.0 / b as f64)?)?
            }
            Construction::Poisson | Construction::Msm => poisson_scaling(self.b, self.law(1.0)?)?,
        })
    }

    /// Scaling horizon in path steps: `b^K` for the MSM, the number of
    /// cells for a measure.
    pub fn horizon_steps(&self, cells: usize) -> f64 {
        match self.construction {
            Some(Construction::Msm) => self.b.powi(self.depth as i32),
            _ => cells as f64,
        }
    }
}

/// Comma-separated model list, expanded with the linear-drift suffix.
pub fn model_ids(models: &[String], linear: bool) -> Vec<String> {
    models
        .iter()
        .flat_map(|m| m.split(','))
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| {
            if linear && !m.ends_with("-linear") {
                format!("{m}-linear")
            } else {
                m.to_string()
            }
        })
        .collect()
}
