//! Registry of the level-model families: parameter layout, domains, start
//! values, likelihood evaluation, estimation and simulation from a flat
//! parameter vector.
//!
//! Parameter order is always the drift (`alpha0`, optionally `alpha1`),
//! then `gamma`, then the innovation parameters:
//!
//! | id | innovation parameters |
//! |----|-----------------------|
//! | `cev-normal` | `sigma` |
//! | `cev-t` | `sigma`, `nu` |
//! | `msm<K>` | `m0`, `b`, `lambda_k`, `sigma` |
//! | `garch` | `a0`, `a1`, `b`, `nu` |
//! | `egarch` | `a0`, `a1`, `a2`, `b`, `nu` |
//! | `jump` | `a0`, `a1`, `b`, `c`, `d`, `tau` |
//!
//! A `-linear` suffix on the id adds the `alpha1` drift slope.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fitting::{
    bic, maximize, pinned_at_bound, standard_errors, Bound, FitReport, MaximizeSettings, ParamTransform, SeMethod,
    SimplexSettings,
};
use crate::garch::{
    egarch_simulate, garch_simulate, level_egarch_log_densities, level_garch_log_densities,
    LevelEgarchParams, LevelGarchParams, VarianceInit,
};
use crate::jump::{jumpdiff_log_densities, jumpdiff_simulate, JumpDiffParams};
use crate::level::{
    cev_log_densities, level_log_densities, level_simulate, CevParams, DriftSpec, IidNormal,
    Innovation, MsmDensity, MsmProcess, StudentTProcess, MIN_DOF,
};
use crate::loglik::LogDensities;
use crate::market_data::RateSeries;
use crate::msm::{MsmParams, StateSpace, DEFAULT_MAX_LEVELS};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    CevNormal,
    CevStudentT,
    Msm { levels: usize },
    Garch,
    Egarch,
    JumpDiffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub linear_drift: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            linear_drift: false,
        }
    }

    pub fn with_linear_drift(mut self, on: bool) -> Self {
        self.linear_drift = on;
        self
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        let mut names = vec!["alpha0"];
        if self.linear_drift {
            names.push("alpha1");
        }
        names.push("gamma");
        names.extend_from_slice(match self.kind {
            ModelKind::CevNormal => &["sigma"][..],
            ModelKind::CevStudentT => &["sigma", "nu"],
            ModelKind::Msm { .. } => &["m0", "b", "lambda_k", "sigma"],
            ModelKind::Garch => &["a0", "a1", "b", "nu"],
            ModelKind::Egarch => &["a0", "a1", "a2", "b", "nu"],
            ModelKind::JumpDiffusion => &["a0", "a1", "b", "c", "d", "tau"],
        });
        names
    }

    pub fn dim(&self) -> usize {
        self.param_names().len()
    }

    /// Position of the first innovation parameter.
    fn offset(&self) -> usize {
        if self.linear_drift {
            3
        } else {
            2
        }
    }

    fn drift(&self, theta: &[f64]) -> DriftSpec {
        if self.linear_drift {
            DriftSpec::linear(theta[0], theta[1])
        } else {
            DriftSpec::constant(theta[0])
        }
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{} takes {} parameters ({}), got {}",
                self.id(),
                self.dim(),
                self.param_names().join(", "),
                theta.len()
            )))
        }
    }

    pub fn to_params(&self, theta: &[f64]) -> Result<ModelParams> {
        self.check_len(theta)?;
        let drift = self.drift(theta);
        let gamma = theta[self.offset() - 1];
        let p = &theta[self.offset()..];
        let out = match self.kind {
            ModelKind::CevNormal => ModelParams::Cev(CevParams {
                drift,
                gamma,
                sigma: p[0],
                innovation: Innovation::Normal,
            }),
            ModelKind::CevStudentT => ModelParams::Cev(CevParams {
                drift,
                gamma,
                sigma: p[0],
                innovation: Innovation::StudentT { nu: p[1] },
            }),
            ModelKind::Msm { levels } => ModelParams::Msm {
                drift,
                gamma,
                msm: MsmParams {
                    levels,
                    m0: p[0],
                    growth: p[1],
                    lambda_top: p[2],
                    sigma: p[3],
                },
            },
            ModelKind::Garch => ModelParams::Garch(LevelGarchParams {
                drift,
                gamma,
                a0: p[0],
                a1: p[1],
                b: p[2],
                nu: p[3],
            }),
            ModelKind::Egarch => ModelParams::Egarch(LevelEgarchParams {
                drift,
                gamma,
                a0: p[0],
                a1: p[1],
                a2: p[2],
                b: p[3],
                nu: p[4],
            }),
            ModelKind::JumpDiffusion => ModelParams::Jump(JumpDiffParams {
                drift,
                gamma,
                a0: p[0],
                a1: p[1],
                b: p[2],
                c: p[3],
                d: p[4],
                tau: p[5],
            }),
        };
        Ok(out)
    }

    /// Parameter domains; `scales` sets the step sizes of unrestricted
    /// parameters.
    pub fn bounds(&self, scales: &Scales) -> Vec<Bound> {
        let mut b = vec![Bound::Free {
            scale: scales.alpha0,
        }];
        if self.linear_drift {
            b.push(Bound::Free {
                scale: scales.alpha1,
            });
        }
        b.push(Bound::Lower(0.0));
        let pos = Bound::Lower(0.0);
        let dof = Bound::Lower(MIN_DOF);
        b.extend(match self.kind {
            ModelKind::CevNormal => vec![pos],
            ModelKind::CevStudentT => vec![pos, dof],
            ModelKind::Msm { .. } => vec![
                Bound::Interval(1.0, 2.0),
                Bound::Lower(1.0),
                Bound::Interval(0.0, 1.0),
                pos,
            ],
            ModelKind::Garch => vec![pos, pos, pos, dof],
            ModelKind::Egarch => vec![
                Bound::Free { scale: 0.1 },
                Bound::Free { scale: 0.1 },
                Bound::Free { scale: 0.1 },
                Bound::Free { scale: 0.05 },
                dof,
            ],
            ModelKind::JumpDiffusion => vec![
                pos,
                pos,
                pos,
                Bound::Free { scale: 1.0 },
                Bound::Free { scale: scales.level_slope },
                pos,
            ],
        });
        b
    }

    /// Default starting point built from a CEV-normal pilot fit.
    pub fn warm_start(&self, pilot: &Pilot) -> Vec<f64> {
        let mut t = vec![pilot.alpha0];
        if self.linear_drift {
            t.push(pilot.alpha1);
        }
        t.push(pilot.gamma);
        let s = pilot.sigma;
        let s2 = s * s;
        t.extend(match self.kind {
            ModelKind::CevNormal => vec![s],
            ModelKind::CevStudentT => vec![s, 5.0],
            ModelKind::Msm { .. } => vec![1.5, 3.0, 0.5, s],
            ModelKind::Garch => vec![0.05 * s2, 0.08, 0.9, 5.0],
            ModelKind::Egarch => vec![0.05 * s2.ln(), 0.0, 0.15, 0.95, 5.0],
            ModelKind::JumpDiffusion => vec![0.05 * s2, 0.08, 0.88, -3.0, 0.0, 3.0 * s],
        });
        t
    }

    /// Natural-scale box for Latin-hypercube starts.
    pub fn start_box(&self, pilot: &Pilot, scales: &Scales) -> Vec<(f64, f64)> {
        let span = |c: f64, w: f64| (c - w, c + w);
        let mut b = vec![span(pilot.alpha0, 2.0 * scales.alpha0)];
        if self.linear_drift {
            b.push(span(pilot.alpha1, 2.0 * scales.alpha1));
        }
        b.push(((pilot.gamma - 0.3).max(0.01), pilot.gamma + 0.3));
        let s = pilot.sigma;
        let s2 = s * s;
        let log_s2 = s2.ln();
        let ordered = |a: f64, c: f64| (a.min(c), a.max(c));
        b.extend(match self.kind {
            ModelKind::CevNormal => vec![(0.7 * s, 1.3 * s)],
            ModelKind::CevStudentT => vec![(0.6 * s, 1.4 * s), (3.0, 15.0)],
            ModelKind::Msm { .. } => vec![(1.1, 1.8), (1.5, 8.0), (0.05, 0.95), (0.6 * s, 1.4 * s)],
            ModelKind::Garch => vec![(0.01 * s2, 0.2 * s2), (0.01, 0.2), (0.7, 0.97), (3.0, 15.0)],
            ModelKind::Egarch => vec![
                ordered(0.01 * log_s2, 0.2 * log_s2),
                (-0.1, 0.1),
                (0.05, 0.4),
                (0.8, 0.99),
                (3.0, 15.0),
            ],
            ModelKind::JumpDiffusion => vec![
                (0.01 * s2, 0.2 * s2),
                (0.01, 0.2),
                (0.7, 0.97),
                (-5.0, -1.0),
                span(0.0, scales.level_slope),
                (1.0 * s, 6.0 * s),
            ],
        });
        b
    }

    pub fn log_densities(&self, series: &RateSeries, theta: &[f64]) -> Result<LogDensities> {
        self.log_densities_with(series, theta, &EvalOptions::default())
    }

    pub fn log_densities_with(
        &self,
        series: &RateSeries,
        theta: &[f64],
        opts: &EvalOptions,
    ) -> Result<LogDensities> {
        match self.to_params(theta)? {
            ModelParams::Cev(p) => cev_log_densities(series, &p),
            ModelParams::Msm { drift, gamma, msm } => {
                msm.validate()?;
                let space = StateSpace::with_cap(&msm, opts.max_levels)?;
                level_log_densities(
                    series,
                    &drift,
                    gamma,
                    &MsmDensity {
                        space: &space,
                        sigma: msm.sigma,
                    },
                )
            }
            ModelParams::Garch(p) => level_garch_log_densities(series, &p, opts.variance_init),
            ModelParams::Egarch(p) => level_egarch_log_densities(series, &p, opts.variance_init),
            ModelParams::Jump(p) => jumpdiff_log_densities(series, &p, opts.variance_init),
        }
    }

    /// Number of pre-sample levels before the first log-density addend.
    pub fn first_index(&self) -> usize {
        match self.kind {
            ModelKind::JumpDiffusion => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ModelKind::CevNormal => write!(f, "cev-normal")?,
            ModelKind::CevStudentT => write!(f, "cev-t")?,
            ModelKind::Msm { levels } => write!(f, "msm{levels}")?,
            ModelKind::Garch => write!(f, "garch")?,
            ModelKind::Egarch => write!(f, "egarch")?,
            ModelKind::JumpDiffusion => write!(f, "jump")?,
        }
        if self.linear_drift {
            write!(f, "-linear")?;
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, linear_drift) = match s.strip_suffix("-linear") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = match base {
            "cev-normal" => ModelKind::CevNormal,
            "cev-t" => ModelKind::CevStudentT,
            "garch" => ModelKind::Garch,
            "egarch" => ModelKind::Egarch,
            "jump" => ModelKind::JumpDiffusion,
            other => match other.strip_prefix("msm").map(str::parse::<usize>) {
                Some(Ok(levels)) if levels >= 1 => ModelKind::Msm { levels },
                _ => {
                    return Err(Error::invalid(format!(
                        "unknown model `{s}`; expected cev-normal, cev-t, msm<K>, garch, egarch or jump, optionally with -linear"
                    )))
                }
            },
        };
        Ok(ModelSpec { kind, linear_drift })
    }
}

/// Typed parameters of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Cev(CevParams),
    Msm {
        drift: DriftSpec,
        gamma: f64,
        msm: MsmParams,
    },
    Garch(LevelGarchParams),
    Egarch(LevelEgarchParams),
    Jump(JumpDiffParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub variance_init: VarianceInit,
    /// Largest MSM order accepted.
    pub max_levels: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            variance_init: VarianceInit::default(),
            max_levels: DEFAULT_MAX_LEVELS,
        }
    }
}

/// Step scales of the unrestricted drift parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub alpha0: f64,
    pub alpha1: f64,
    /// Scale of a coefficient multiplying the level.
    pub level_slope: f64,
}

impl Scales {
    pub fn from_series(series: &RateSeries) -> Self {
        let inc = series.increments();
        let n = inc.values.len().max(1) as f64;
        let sd_inc = stats::variance(&inc.values).sqrt().max(f64::MIN_POSITIVE);
        let sd_level = stats::variance(series.values()).sqrt().max(1e-8);
        let mean_level = stats::mean(series.values()).abs().max(1e-8);
        Self {
            alpha0: 4.0 * sd_inc / n.sqrt(),
            alpha1: 4.0 * sd_inc / (n.sqrt() * sd_level),
            level_slope: 1.0 / mean_level,
        }
    }
}

/// Closed-form-profile CEV-normal estimates used to seed every model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pilot {
    pub alpha0: f64,
    pub alpha1: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
}

/// Weighted least-squares drift and scale for a fixed `gamma`; this is the
/// exact normal-innovation likelihood maximizer given `gamma`.
fn profile_at_gamma(series: &RateSeries, gamma: f64, linear: bool) -> Option<Pilot> {
    let inc = series.increments();
    let m = inc.values.len();
    let mut sw = 0.0;
    let mut swr = 0.0;
    let mut swrr = 0.0;
    let mut swy = 0.0;
    let mut swry = 0.0;
    let mut log_r = 0.0;
    for (&y, &r) in inc.values.iter().zip(&inc.lagged_levels) {
        let w = r.powf(-2.0 * gamma);
        sw += w;
        swr += w * r;
        swrr += w * r * r;
        swy += w * y;
        swry += w * r * y;
        log_r += r.ln();
    }
    let (a0, a1) = if linear {
        let det = sw * swrr - swr * swr;
        if det.abs() <= f64::EPSILON * sw * swrr {
            return None;
        }
        ((swrr * swy - swr * swry) / det, (sw * swry - swr * swy) / det)
    } else {
        (swy / sw, 0.0)
    };
    let ss: f64 = inc
        .values
        .iter()
        .zip(&inc.lagged_levels)
        .map(|(&y, &r)| (y - a0 - a1 * r).powi(2) * r.powf(-2.0 * gamma))
        .sum();
    let var = ss / m as f64;
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let ll = -0.5 * m as f64 * (stats::LN_2PI + var.ln() + 1.0) - gamma * log_r;
    Some(Pilot {
        alpha0: a0,
        alpha1: a1,
        gamma,
        sigma: var.sqrt(),
        log_likelihood: ll,
    })
}

/// CEV-normal maximum likelihood by a grid over `gamma` in `[0, 3]` refined
/// with golden-section search; drift and scale are profiled out.
pub fn pilot_fit(series: &RateSeries, linear: bool) -> Result<Pilot> {
    series.check_positive()?;
    if series.len() < 3 {
        return Err(Error::InsufficientData("need at least 3 levels".into()));
    }
    let eval = |g: f64| profile_at_gamma(series, g, linear);
    let score = |g: f64| eval(g).map_or(f64::NEG_INFINITY, |p| p.log_likelihood);
    let step = 0.05;
    let best = (0..=60)
        .map(|i| i as f64 * step)
        .max_by(|a, b| score(*a).total_cmp(&score(*b)))
        .unwrap_or(0.5);
    let (mut lo, mut hi) = ((best - step).max(0.0), best + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (score(c), score(d));
    while hi - lo > 1e-9 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = score(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = score(d);
        }
    }
    let g = if score(best) > score(0.5 * (lo + hi)) {
        best
    } else {
        0.5 * (lo + hi)
    };
    eval(g).ok_or_else(|| Error::Numerical("CEV pilot fit failed".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    /// Latin-hypercube starts in addition to the warm starts.
    pub starts: usize,
    pub seed: u64,
    /// Extra natural-scale starting points; the pilot-based start is always
    /// tried as well.
    pub warm_starts: Vec<Vec<f64>>,
    /// Overrides the default start box.
    pub start_box: Option<Vec<(f64, f64)>>,
    pub simplex: SimplexSettings,
    pub restarts: usize,
    pub eval: EvalOptions,
    pub compute_se: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            starts: 2,
            seed: 0,
            warm_starts: Vec::new(),
            start_box: None,
            simplex: SimplexSettings::default(),
            restarts: 2,
            eval: EvalOptions::default(),
            compute_se: true,
        }
    }
}

/// Estimates `spec` on `series` by maximum likelihood.
pub fn fit_model(spec: &ModelSpec, series: &RateSeries, settings: &FitSettings) -> Result<FitReport> {
    let pilot = pilot_fit(series, spec.linear_drift)?;
    let scales = Scales::from_series(series);
    let transform = ParamTransform::new(spec.bounds(&scales));
    let mut warm_starts = settings.warm_starts.clone();
    warm_starts.push(spec.warm_start(&pilot));
    let start_box = settings
        .start_box
        .clone()
        .unwrap_or_else(|| spec.start_box(&pilot, &scales));
    let max_settings = MaximizeSettings {
        starts: settings.starts,
        warm_starts,
        start_box,
        seed: settings.seed,
        simplex: settings.simplex,
        restarts: settings.restarts,
    };
    let objective = |theta: &[f64]| {
        spec.log_densities_with(series, theta, &settings.eval)
            .map_or(f64::NAN, |d| d.total())
    };
    let opt = maximize(objective, &transform, &max_settings)?;
    let mut report = build_report(spec, series, &opt.theta, &transform, settings)?;
    report.converged = opt.converged;
    report.evaluations = opt.evaluations;
    report.iterations = opt.iterations;
    report.starts = opt.runs.len();
    if !opt.converged {
        report
            .diagnostics
            .push("optimizer stopped at the iteration cap".into());
    }
    let finite_runs: Vec<f64> = opt
        .runs
        .iter()
        .map(|r| r.log_likelihood)
        .filter(|v| v.is_finite())
        .collect();
    if finite_runs.len() > 1 {
        let spread = finite_runs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - finite_runs.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > 1.0 {
            report.diagnostics.push(format!(
                "starts reached log-likelihoods spread over {spread:.3}"
            ));
        }
    }
    Ok(report)
}

/// Evaluates `spec` at fixed parameters (no optimization).
pub fn evaluate_model(
    spec: &ModelSpec,
    series: &RateSeries,
    theta: &[f64],
    settings: &FitSettings,
) -> Result<FitReport> {
    let scales = Scales::from_series(series);
    let transform = ParamTransform::new(spec.bounds(&scales));
    let mut report = build_report(spec, series, theta, &transform, settings)?;
    report.converged = true;
    report.evaluations = 1;
    report
        .diagnostics
        .push("evaluated at supplied parameters".into());
    Ok(report)
}

fn build_report(
    spec: &ModelSpec,
    series: &RateSeries,
    theta: &[f64],
    transform: &ParamTransform,
    settings: &FitSettings,
) -> Result<FitReport> {
    let densities = spec.log_densities_with(series, theta, &settings.eval)?;
    let log_likelihood = densities.total();
    if !log_likelihood.is_finite() {
        return Err(Error::Numerical(format!(
            "{} log-likelihood is not finite at the supplied parameters",
            spec.id()
        )));
    }
    let names: Vec<String> = spec.param_names().iter().map(|s| s.to_string()).collect();
    let mut diagnostics = Vec::new();
    let (ses, methods) = if settings.compute_se && transform.contains(theta) {
        let per_obs = |t: &[f64]| spec.log_densities_with(series, t, &settings.eval).map(|d| d.values);
        match standard_errors(per_obs, theta, transform) {
            Ok(se) => (se.values, se.methods),
            Err(e) => {
                diagnostics.push(format!("standard errors unavailable: {e}"));
                (vec![f64::NAN; theta.len()], vec![SeMethod::Unavailable; theta.len()])
            }
        }
    } else {
        if settings.compute_se {
            diagnostics.push("standard errors unavailable: estimate on the domain boundary".into());
        }
        (vec![f64::NAN; theta.len()], vec![SeMethod::Unavailable; theta.len()])
    };
    let pinned = pinned_at_bound(theta, transform);
    for ((name, m), at_bound) in names.iter().zip(&methods).zip(&pinned) {
        if *at_bound && settings.compute_se {
            diagnostics.push(format!("{name}: estimate at its bound, held fixed for standard errors"));
            continue;
        }
        match m {
            SeMethod::OuterProduct => diagnostics.push(format!(
                "{name}: information not positive definite, outer-product standard error"
            )),
            SeMethod::Unavailable if settings.compute_se => {
                diagnostics.push(format!("{name}: no standard error"))
            }
            _ => {}
        }
    }
    diagnostics.extend(parameter_diagnostics(spec, theta)?);
    let n = densities.len();
    Ok(FitReport {
        model: spec.id(),
        param_names: names,
        estimates: theta.to_vec(),
        standard_errors: ses,
        se_methods: methods,
        log_likelihood,
        bic: bic(log_likelihood, theta.len(), n),
        n_obs: n,
        first_index: densities.first_index,
        converged: true,
        evaluations: 0,
        iterations: 0,
        starts: 0,
        diagnostics,
        log_densities: densities.values,
    })
}

fn parameter_diagnostics(spec: &ModelSpec, theta: &[f64]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let near_floor = |nu: f64| nu < MIN_DOF + 0.05;
    match spec.to_params(theta)? {
        ModelParams::Cev(CevParams {
            innovation: Innovation::StudentT { nu },
            ..
        }) if near_floor(nu) => out.push(format!("nu = {nu} sits at its lower bound")),
        ModelParams::Garch(p) => {
            if p.persistence() >= 1.0 {
                out.push(format!(
                    "a1 + b = {} >= 1: variance recursion is not covariance-stationary",
                    p.persistence()
                ));
            }
            if near_floor(p.nu) {
                out.push(format!("nu = {} sits at its lower bound", p.nu));
            }
        }
        ModelParams::Egarch(p) => {
            if !p.is_stationary() {
                out.push(format!("|b| = {} >= 1: log-variance recursion is not stationary", p.b.abs()));
            }
            if near_floor(p.nu) {
                out.push(format!("nu = {} sits at its lower bound", p.nu));
            }
        }
        ModelParams::Jump(p) if p.a1 + p.b >= 1.0 => out.push(format!(
            "a1 + b = {} >= 1: variance recursion is not covariance-stationary",
            p.a1 + p.b
        )),
        _ => {}
    }
    if let Some(stationary) = spec.drift(theta).is_stationary() {
        if !stationary {
            out.push("drift is not mean-reverting".into());
        }
    }
    Ok(out)
}

/// Simulated level path of any registered model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedLevels {
    pub series: RateSeries,
    pub redraws: usize,
    pub truncated: bool,
}

/// Simulates `n` steps of `spec` at `theta` from `r1` (the jump-diffusion
/// repeats `r1` as its second pre-sample level).
pub fn simulate_model(
    spec: &ModelSpec,
    theta: &[f64],
    r1: f64,
    n: usize,
    seed: u64,
) -> Result<SimulatedLevels> {
    let path = match spec.to_params(theta)? {
        ModelParams::Cev(p) => {
            p.validate()?;
            match p.innovation {
                Innovation::Normal => {
                    level_simulate(&p.drift, p.gamma, &mut IidNormal { sigma: p.sigma }, r1, n, seed)?
                }
                Innovation::StudentT { nu } => level_simulate(
                    &p.drift,
                    p.gamma,
                    &mut StudentTProcess::new(p.sigma, nu)?,
                    r1,
                    n,
                    seed,
                )?,
            }
        }
        ModelParams::Msm { drift, gamma, msm } => {
            level_simulate(&drift, gamma, &mut MsmProcess::new(msm)?, r1, n, seed)?
        }
        ModelParams::Garch(p) => garch_simulate(&p, r1, n, seed)?,
        ModelParams::Egarch(p) => egarch_simulate(&p, r1, n, seed)?,
        ModelParams::Jump(p) => {
            let j = jumpdiff_simulate(&p, r1, r1, n, seed)?;
            return Ok(SimulatedLevels {
                series: j.series,
                redraws: j.redraws,
                truncated: j.truncated,
            });
        }
    };
    Ok(SimulatedLevels {
        series: path.series,
        redraws: path.redraws,
        truncated: path.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cev_series(seed: u64) -> RateSeries {
        let spec: ModelSpec = "cev-normal-linear".parse().unwrap();
        simulate_model(&spec, &[0.02, -0.004, 0.8, 0.03], 5.0, 3000, seed)
            .unwrap()
            .series
    }

    #[test]
    fn ids_round_trip() {
        for id in ["cev-normal", "cev-t", "msm9", "garch", "egarch", "jump", "msm3-linear", "cev-t-linear"] {
            let spec: ModelSpec = id.parse().unwrap();
            assert_eq!(spec.id(), id);
        }
        assert!("msm0".parse::<ModelSpec>().is_err());
        assert!("arch".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn dimensions_match_layout() {
        let dims = [
            ("cev-normal", 3),
            ("cev-t", 4),
            ("msm9", 6),
            ("garch", 6),
            ("egarch", 7),
            ("jump", 8),
            ("msm5-linear", 7),
        ];
        let s = Scales {
            alpha0: 1.0,
            alpha1: 1.0,
            level_slope: 1.0,
        };
        for (id, k) in dims {
            let spec: ModelSpec = id.parse().unwrap();
            assert_eq!(spec.dim(), k, "{id}");
            assert_eq!(spec.bounds(&s).len(), k, "{id}");
        }
    }

    #[test]
    fn pilot_matches_general_optimizer() {
        let series = cev_series(1);
        let pilot = pilot_fit(&series, true).unwrap();
        let spec: ModelSpec = "cev-normal-linear".parse().unwrap();
        let theta = [pilot.alpha0, pilot.alpha1, pilot.gamma, pilot.sigma];
        let ll = spec.log_densities(&series, &theta).unwrap().total();
        assert!((ll - pilot.log_likelihood).abs() < 1e-8 * ll.abs());
        let report = fit_model(
            &spec,
            &series,
            &FitSettings {
                starts: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.log_likelihood <= pilot.log_likelihood + 1e-6);
        assert!(report.log_likelihood >= pilot.log_likelihood - 1e-6);
    }

    #[test]
    fn report_invariants() {
        let series = cev_series(2);
        let spec: ModelSpec = "cev-t".parse().unwrap();
        let report = fit_model(&spec, &series, &FitSettings::default()).unwrap();
        let sum: f64 = report.log_densities.iter().sum();
        assert!((sum - report.log_likelihood).abs() < 1e-8);
        assert_eq!(report.bic, bic(report.log_likelihood, 4, report.n_obs));
        assert_eq!(report.n_obs, series.len() - 1);
        let again = spec.log_densities(&series, &report.estimates).unwrap().total();
        assert_eq!(again, report.log_likelihood);
    }

    #[test]
    fn jump_uses_two_presample_levels() {
        let series = cev_series(3);
        let spec: ModelSpec = "jump".parse().unwrap();
        let pilot = pilot_fit(&series, false).unwrap();
        let theta = spec.warm_start(&pilot);
        let r = evaluate_model(
            &spec,
            &series,
            &theta,
            &FitSettings {
                compute_se: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.first_index, 2);
        assert_eq!(r.n_obs, series.len() - 2);
    }

    #[test]
    fn wrong_length_rejected() {
        let series = cev_series(4);
        let spec: ModelSpec = "msm3".parse().unwrap();
        assert!(matches!(
            spec.log_densities(&series, &[0.0, 0.5]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn msm_order_cap_respected() {
        let series = cev_series(5);
        let spec: ModelSpec = "msm4".parse().unwrap();
        let opts = EvalOptions {
            max_levels: 3,
            ..Default::default()
        };
        let theta = [0.0, 0.8, 1.4, 3.0, 0.5, 0.03];
        assert!(matches!(
            spec.log_densities_with(&series, &theta, &opts),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn simulation_reproducible_for_every_family() {
        let pilot = pilot_fit(&cev_series(6), false).unwrap();
        for id in ["cev-normal", "cev-t", "msm3", "garch", "egarch", "jump"] {
            let spec: ModelSpec = id.parse().unwrap();
            let theta = spec.warm_start(&pilot);
            let a = simulate_model(&spec, &theta, 5.0, 200, 11).unwrap();
            let b = simulate_model(&spec, &theta, 5.0, 200, 11).unwrap();
            assert_eq!(a, b, "{id}");
            assert!(a.series.values().iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn boundary_flags_reported() {
        let series = cev_series(7);
        let spec: ModelSpec = "garch".parse().unwrap();
        let pilot = pilot_fit(&series, false).unwrap();
        let s2 = pilot.sigma * pilot.sigma;
        let theta = [pilot.alpha0, pilot.gamma, 0.01 * s2, 0.1, 0.92, 2.01];
        let r = evaluate_model(
            &spec,
            &series,
            &theta,
            &FitSettings {
                compute_se: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.diagnostics.iter().any(|d| d.contains("a1 + b")));
        assert!(r.diagnostics.iter().any(|d| d.contains("nu")));
    }
}
