//! Rate-level layer: drift `alpha0 + alpha1 * r_{t-1}` and CEV scaling
//! `r_{t-1}^gamma` around an arbitrary innovation process, plus the pure CEV
//! models with normal or student-t innovations.
//!
//! For `x_t = (dr_t - alpha0 - alpha1 r_{t-1}) / r_{t-1}^gamma` the density of
//! the level is `f(r_t | .) = p(x_t | .) / r_{t-1}^gamma`, so every model's
//! log-likelihood is its innovation log-likelihood minus
//! `gamma * sum(log r_{t-1})`. The first level `r_1` is a pre-sample value.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::loglik::LogDensities;
use crate::market_data::{normalized_increments, RateSeries};
use crate::msm::{self, MsmParams, MultiplierChain, StateSpace};
use crate::stats;
use crate::SimRng;

/// Smallest admissible student-t degrees of freedom.
pub const MIN_DOF: f64 = 2.001;

/// Redraws allowed per step before a simulated path is truncated.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub alpha0: f64,
    /// Linear mean-reversion coefficient; `None` means zero.
    pub alpha1: Option<f64>,
}

impl DriftSpec {
    pub fn constant(alpha0: f64) -> Self {
        Self {
            alpha0,
            alpha1: None,
        }
    }

    pub fn linear(alpha0: f64, alpha1: f64) -> Self {
        Self {
            alpha0,
            alpha1: Some(alpha1),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1.unwrap_or(0.0)
    }

    /// Expected increment given the previous level.
    pub fn mean_increment(&self, r_prev: f64) -> f64 {
        self.alpha0 + self.alpha1() * r_prev
    }

    /// `Some(-2 < alpha1 < 0)` when a linear term is present.
    pub fn is_stationary(&self) -> Option<bool> {
        self.alpha1.map(|a| a > -2.0 && a < 0.0)
    }
}

/// Joint log-density of an innovation sequence, one addend per observation.
pub trait InnovationDensity {
    fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidNormal {
    pub sigma: f64,
}

impl InnovationDensity for IidNormal {
    fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_sigma(self.sigma)?;
        let var = self.sigma * self.sigma;
        Ok(x.iter().map(|&v| stats::normal_log_density(v, var)).collect())
    }
}

/// Unit-variance student-t scaled by `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidStudentT {
    pub sigma: f64,
    pub nu: f64,
}

impl InnovationDensity for IidStudentT {
    fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_sigma(self.sigma)?;
        check_dof(self.nu)?;
        let var = self.sigma * self.sigma;
        let c = stats::std_t_log_const(self.nu);
        Ok(x
            .iter()
            .map(|&v| stats::std_t_log_density_with_const(v, var, self.nu, c))
            .collect())
    }
}

impl InnovationDensity for MsmParams {
    fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        msm::log_densities(x, self)
    }
}

/// MSM density with a prebuilt state space, for repeated evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MsmDensity<'a> {
    pub space: &'a StateSpace,
    pub sigma: f64,
}

impl InnovationDensity for MsmDensity<'_> {
    fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        msm::log_densities_with_space(x, self.sigma, self.space)
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma must be positive, got {sigma}")))
    }
}

pub(crate) fn check_dof(nu: f64) -> Result<()> {
    if nu > 2.0 && !nu.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("degrees of freedom must exceed 2, got {nu}")))
    }
}

/// `gamma * log r_{t-1}` for `t = 2..n`; errors on a nonpositive level.
pub fn jacobian_terms(series: &RateSeries, gamma: f64) -> Result<Vec<f64>> {
    let v = series.values();
    v[..v.len() - 1]
        .iter()
        .enumerate()
        .map(|(index, &r)| {
            if r <= 0.0 {
                Err(Error::NonPositiveLevel { index, value: r })
            } else {
                Ok(gamma * r.ln())
            }
        })
        .collect()
}

/// Per-observation level log-densities `log p(x_t | .) - gamma log r_{t-1}`,
/// `t = 2..n`.
pub fn level_log_densities(
    series: &RateSeries,
    drift: &DriftSpec,
    gamma: f64,
    inner: &impl InnovationDensity,
) -> Result<LogDensities> {
    series.check_positive()?;
    let x = normalized_increments(series, drift.alpha0, drift.alpha1(), gamma)?;
    let mut values = inner.log_densities(&x)?;
    if values.len() != x.len() {
        return Err(Error::Numerical(
            "innovation density returned the wrong number of addends".into(),
        ));
    }
    for (v, j) in values.iter_mut().zip(jacobian_terms(series, gamma)?) {
        *v -= j;
    }
    Ok(LogDensities::new(1, values))
}

pub fn level_log_likelihood(
    series: &RateSeries,
    drift: &DriftSpec,
    gamma: f64,
    inner: &impl InnovationDensity,
) -> Result<f64> {
    Ok(level_log_densities(series, drift, gamma, inner)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Normal,
    /// Unit-variance student-t with `nu > 2` degrees of freedom.
    StudentT { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CevParams {
    pub drift: DriftSpec,
    pub gamma: f64,
    pub sigma: f64,
    pub innovation: Innovation,
}

impl CevParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        check_sigma(self.sigma)?;
        if let Innovation::StudentT { nu } = self.innovation {
            check_dof(nu)?;
        }
        Ok(())
    }
}

pub fn cev_log_densities(series: &RateSeries, params: &CevParams) -> Result<LogDensities> {
    params.validate()?;
    match params.innovation {
        Innovation::Normal => level_log_densities(
            series,
            &params.drift,
            params.gamma,
            &IidNormal {
                sigma: params.sigma,
            },
        ),
        Innovation::StudentT { nu } => level_log_densities(
            series,
            &params.drift,
            params.gamma,
            &IidStudentT {
                sigma: params.sigma,
                nu,
            },
        ),
    }
}

pub fn cev_log_likelihood(series: &RateSeries, params: &CevParams) -> Result<f64> {
    Ok(cev_log_densities(series, params)?.total())
}

/// Innovation generator driving [`level_simulate`].
///
/// Each step calls [`advance`](Self::advance) once, then
/// [`draw`](Self::draw) until the resulting level is positive, then
/// [`accept`](Self::accept) with the innovation that was used. Redraws
/// therefore resample only the shock, never the latent volatility state.
pub trait InnovationProcess {
    /// Called once before the first step.
    fn start(&mut self, _rng: &mut SimRng) {}
    fn advance(&mut self, rng: &mut SimRng);
    fn draw(&self, rng: &mut SimRng) -> f64;
    fn accept(&mut self, _x: f64) {}
}

impl InnovationProcess for IidNormal {
    fn advance(&mut self, _rng: &mut SimRng) {}

    fn draw(&self, rng: &mut SimRng) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.sigma * e
    }
}

/// Draws a unit-variance student-t variate.
pub fn draw_std_t(dist: &StudentT<f64>, nu: f64, rng: &mut SimRng) -> f64 {
    dist.sample(rng) * ((nu - 2.0) / nu).sqrt()
}

/// Sampler form of [`IidStudentT`].
#[derive(Debug, Clone)]
pub struct StudentTProcess {
    sigma: f64,
    nu: f64,
    dist: StudentT<f64>,
}

impl StudentTProcess {
    pub fn new(sigma: f64, nu: f64) -> Result<Self> {
        check_sigma(sigma)?;
        check_dof(nu)?;
        let dist = StudentT::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self { sigma, nu, dist })
    }
}

impl InnovationProcess for StudentTProcess {
    fn advance(&mut self, _rng: &mut SimRng) {}

    fn draw(&self, rng: &mut SimRng) -> f64 {
        self.sigma * draw_std_t(&self.dist, self.nu, rng)
    }
}

/// MSM volatility: the multiplier chain moves once per step.
#[derive(Debug, Clone)]
pub struct MsmProcess {
    params: MsmParams,
    chain: Option<MultiplierChain>,
    started: bool,
}

impl MsmProcess {
    pub fn new(params: MsmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            chain: None,
            started: false,
        })
    }

    /// Current volatility product, once started.
    pub fn g(&self) -> Option<f64> {
        self.chain.as_ref().map(|c| c.g())
    }
}

impl InnovationProcess for MsmProcess {
    fn start(&mut self, rng: &mut SimRng) {
        let lambdas = self.params.switching_probabilities();
        self.chain = Some(MultiplierChain::stationary(self.params.m0, &lambdas, rng));
    }

    fn advance(&mut self, rng: &mut SimRng) {
        // The stationary draw at start is the state of the first step.
        if !self.started {
            self.started = true;
            return;
        }
        if let Some(chain) = self.chain.as_mut() {
            chain.advance(rng);
        }
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        let g = self.g().expect("MsmProcess::start not called");
        let e: f64 = rng.sample(StandardNormal);
        self.params.sigma * g.sqrt() * e
    }
}

/// Simulated level path.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPath {
    pub series: RateSeries,
    /// Accepted innovations, one per increment.
    pub innovations: Vec<f64>,
    /// Total number of rejected draws.
    pub redraws: usize,
    /// Set when some step exhausted [`MAX_REDRAWS`]; the path ends there.
    pub truncated: bool,
}

/// Iterates `r_t = r_{t-1} + alpha0 + alpha1 r_{t-1} + r_{t-1}^gamma x_t` for
/// `n` steps starting at `r1` (the series has `n + 1` levels unless
/// truncated). Draws that would make `r_t <= 0` are rejected and redrawn.
pub fn level_simulate(
    drift: &DriftSpec,
    gamma: f64,
    process: &mut impl InnovationProcess,
    r1: f64,
    n: usize,
    seed: u64,
) -> Result<LevelPath> {
    let mut rng = crate::seeded_rng(seed);
    level_simulate_with_rng(drift, gamma, process, r1, n, &mut rng)
}

pub fn level_simulate_with_rng(
    drift: &DriftSpec,
    gamma: f64,
    process: &mut impl InnovationProcess,
    r1: f64,
    n: usize,
    rng: &mut SimRng,
) -> Result<LevelPath> {
    if !(r1 > 0.0) || !r1.is_finite() {
        return Err(Error::NonPositiveLevel {
            index: 0,
            value: r1,
        });
    }
    if n == 0 {
        return Err(Error::InsufficientData("need at least one step".into()));
    }
    let mut levels = Vec::with_capacity(n + 1);
    let mut innovations = Vec::with_capacity(n);
    levels.push(r1);
    let mut redraws = 0;
    let mut truncated = false;
    process.start(rng);
    let mut r = r1;
    'steps: for t in 0..n {
        process.advance(rng);
        let mean = r + drift.mean_increment(r);
        let scale = r.powf(gamma);
        let mut attempts = 0;
        loop {
            let x = process.draw(rng);
            let next = mean + scale * x;
            if next > 0.0 && next.is_finite() {
                process.accept(x);
                innovations.push(x);
                levels.push(next);
                r = next;
                break;
            }
            attempts += 1;
            redraws += 1;
            if attempts >= MAX_REDRAWS {
                log::warn!("simulated path truncated at step {} after {MAX_REDRAWS} redraws", t + 1);
                truncated = true;
                break 'steps;
            }
        }
    }
    let series = RateSeries::from_values(levels)?;
    Ok(LevelPath {
        series,
        innovations,
        redraws,
        truncated,
    })
}
