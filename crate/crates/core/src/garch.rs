//! Level-GARCH(1,1) and level-EGARCH(1,1) with unit-variance student-t
//! innovations.
//!
//! ```text
//! GARCH:   h_t = a0 + a1 x_{t-1}^2 + b h_{t-1}
//! EGARCH:  log h_t = a0 + a1 e_{t-1} + a2 |e_{t-1}| + b log h_{t-1},  e = x / sqrt(h)
//! ```
//!
//! where `x_t` are the normalized increments of the level layer. The
//! EGARCH recursion has no `E|e|` centering term.
//!
//! Both recursions need one pre-sample step. With [`VarianceInit::SampleVariance`]
//! (the default) the pre-sample `h_1` and `x_1^2` are set to the sample
//! variance of `x`, and the pre-sample EGARCH shock `e_1` is zero, so the
//! first conditional variance already comes from the recursion. This keeps
//! the reductions to the pure CEV model exact.

use rand_distr::StudentT;

use crate::error::{Error, Result};
use crate::level::{
    check_dof, draw_std_t, jacobian_terms, level_simulate_with_rng, DriftSpec, InnovationProcess,
    LevelPath,
};
use crate::loglik::LogDensities;
use crate::market_data::{normalized_increments, RateSeries};
use crate::stats;
use crate::SimRng;

/// Pre-sample value of the variance recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceInit {
    /// Sample variance of the normalized increments.
    #[default]
    SampleVariance,
    /// Unconditional variance when the recursion is stationary, otherwise
    /// the sample variance.
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGarchParams {
    pub drift: DriftSpec,
    pub gamma: f64,
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    pub nu: f64,
}

impl LevelGarchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0) || !self.a0.is_finite() {
            return Err(Error::invalid(format!("a0 must be positive, got {}", self.a0)));
        }
        if !(self.a1 >= 0.0) || !(self.b >= 0.0) {
            return Err(Error::invalid(format!(
                "a1 and b must be nonnegative, got {} and {}",
                self.a1, self.b
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        check_dof(self.nu)
    }

    /// `a1 + b`; the recursion is covariance-stationary below 1.
    pub fn persistence(&self) -> f64 {
        self.a1 + self.b
    }

    pub fn unconditional_variance(&self) -> Option<f64> {
        let p = self.persistence();
        (p < 1.0).then(|| self.a0 / (1.0 - p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEgarchParams {
    pub drift: DriftSpec,
    pub gamma: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub nu: f64,
}

impl LevelEgarchParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a0", self.a0), ("a1", self.a1), ("a2", self.a2), ("b", self.b)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        check_dof(self.nu)
    }

    /// `|b| < 1`.
    pub fn is_stationary(&self) -> bool {
        self.b.abs() < 1.0
    }
}

/// GARCH conditional variances `h_2..h_n` for innovations `x_2..x_n`.
pub fn garch_variances(x: &[f64], a0: f64, a1: f64, b: f64, init: VarianceInit) -> Vec<f64> {
    let mut pre = stats::variance(x);
    if init == VarianceInit::Unconditional && a1 + b < 1.0 {
        pre = a0 / (1.0 - a1 - b);
    }
    let mut h = Vec::with_capacity(x.len());
    let (mut x_prev_sq, mut h_prev) = (pre, pre);
    for &v in x {
        let ht = a0 + a1 * x_prev_sq + b * h_prev;
        h.push(ht);
        x_prev_sq = v * v;
        h_prev = ht;
    }
    h
}

/// EGARCH log conditional variances for innovations `x_2..x_n`.
pub fn egarch_log_variances(
    x: &[f64],
    a0: f64,
    a1: f64,
    a2: f64,
    b: f64,
    init: VarianceInit,
) -> Vec<f64> {
    let mut log_h_prev = stats::variance(x).ln();
    if init == VarianceInit::Unconditional && b.abs() < 1.0 {
        log_h_prev = a0 / (1.0 - b);
    }
    let mut eps_prev = 0.0;
    let mut out = Vec::with_capacity(x.len());
    for &v in x {
        let log_h = a0 + a1 * eps_prev + a2 * eps_prev.abs() + b * log_h_prev;
        out.push(log_h);
        eps_prev = v * (-0.5 * log_h).exp();
        log_h_prev = log_h;
    }
    out
}

fn t_level_densities(
    series: &RateSeries,
    x: &[f64],
    variances: impl Iterator<Item = f64>,
    gamma: f64,
    nu: f64,
) -> Result<LogDensities> {
    let c = stats::std_t_log_const(nu);
    let jac = jacobian_terms(series, gamma)?;
    let mut values = Vec::with_capacity(x.len());
    for (t, ((&xt, h), j)) in x.iter().zip(variances).zip(jac).enumerate() {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Numerical(format!(
                "conditional variance {h} at observation {}",
                t + 1
            )));
        }
        values.push(stats::std_t_log_density_with_const(xt, h, nu, c) - j);
    }
    Ok(LogDensities::new(1, values))
}

pub fn level_garch_log_densities(
    series: &RateSeries,
    params: &LevelGarchParams,
    init: VarianceInit,
) -> Result<LogDensities> {
    params.validate()?;
    series.check_positive()?;
    let d = &params.drift;
    let x = normalized_increments(series, d.alpha0, d.alpha1(), params.gamma)?;
    let h = garch_variances(&x, params.a0, params.a1, params.b, init);
    t_level_densities(series, &x, h.into_iter(), params.gamma, params.nu)
}

pub fn level_garch_loglik(series: &RateSeries, params: &LevelGarchParams) -> Result<f64> {
    Ok(level_garch_log_densities(series, params, VarianceInit::default())?.total())
}

pub fn level_egarch_log_densities(
    series: &RateSeries,
    params: &LevelEgarchParams,
    init: VarianceInit,
) -> Result<LogDensities> {
    params.validate()?;
    series.check_positive()?;
    let d = &params.drift;
    let x = normalized_increments(series, d.alpha0, d.alpha1(), params.gamma)?;
    let log_h = egarch_log_variances(&x, params.a0, params.a1, params.a2, params.b, init);
    t_level_densities(
        series,
        &x,
        log_h.into_iter().map(f64::exp),
        params.gamma,
        params.nu,
    )
}

pub fn level_egarch_loglik(series: &RateSeries, params: &LevelEgarchParams) -> Result<f64> {
    Ok(level_egarch_log_densities(series, params, VarianceInit::default())?.total())
}

/// GARCH innovation generator. Starts from the unconditional variance when
/// it exists, otherwise from `a0`.
#[derive(Debug, Clone)]
pub struct GarchProcess {
    a0: f64,
    a1: f64,
    b: f64,
    nu: f64,
    dist: StudentT<f64>,
    h: f64,
    h_prev: f64,
    x_prev_sq: f64,
}

impl GarchProcess {
    pub fn new(params: &LevelGarchParams) -> Result<Self> {
        params.validate()?;
        let h0 = params.unconditional_variance().unwrap_or(params.a0);
        Ok(Self {
            a0: params.a0,
            a1: params.a1,
            b: params.b,
            nu: params.nu,
            dist: StudentT::new(params.nu).map_err(|e| Error::invalid(e.to_string()))?,
            h: h0,
            h_prev: h0,
            x_prev_sq: h0,
        })
    }

    pub fn variance(&self) -> f64 {
        self.h
    }
}

impl InnovationProcess for GarchProcess {
    fn advance(&mut self, _rng: &mut SimRng) {
        self.h = self.a0 + self.a1 * self.x_prev_sq + self.b * self.h_prev;
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        self.h.sqrt() * draw_std_t(&self.dist, self.nu, rng)
    }

    fn accept(&mut self, x: f64) {
        self.x_prev_sq = x * x;
        self.h_prev = self.h;
    }
}

/// EGARCH innovation generator. Starts at `log h = a0 / (1 - b)` when
/// `|b| < 1`, otherwise at `a0`, with a zero pre-sample shock.
#[derive(Debug, Clone)]
pub struct EgarchProcess {
    params: LevelEgarchParams,
    dist: StudentT<f64>,
    log_h: f64,
    log_h_prev: f64,
    eps_prev: f64,
}

impl EgarchProcess {
    pub fn new(params: &LevelEgarchParams) -> Result<Self> {
        params.validate()?;
        let start = if params.is_stationary() {
            params.a0 / (1.0 - params.b)
        } else {
            params.a0
        };
        Ok(Self {
            params: *params,
            dist: StudentT::new(params.nu).map_err(|e| Error::invalid(e.to_string()))?,
            log_h: start,
            log_h_prev: start,
            eps_prev: 0.0,
        })
    }

    pub fn variance(&self) -> f64 {
        self.log_h.exp()
    }
}

impl InnovationProcess for EgarchProcess {
    fn advance(&mut self, _rng: &mut SimRng) {
        let p = &self.params;
        self.log_h =
            p.a0 + p.a1 * self.eps_prev + p.a2 * self.eps_prev.abs() + p.b * self.log_h_prev;
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        (0.5 * self.log_h).exp() * draw_std_t(&self.dist, self.params.nu, rng)
    }

    fn accept(&mut self, x: f64) {
        self.eps_prev = x * (-0.5 * self.log_h).exp();
        self.log_h_prev = self.log_h;
    }
}

pub fn garch_simulate(params: &LevelGarchParams, r1: f64, n: usize, seed: u64) -> Result<LevelPath> {
    let mut process = GarchProcess::new(params)?;
    let mut rng = crate::seeded_rng(seed);
    level_simulate_with_rng(&params.drift, params.gamma, &mut process, r1, n, &mut rng)
}

pub fn egarch_simulate(
    params: &LevelEgarchParams,
    r1: f64,
    n: usize,
    seed: u64,
) -> Result<LevelPath> {
    let mut process = EgarchProcess::new(params)?;
    let mut rng = crate::seeded_rng(seed);
    level_simulate_with_rng(&params.drift, params.gamma, &mut process, r1, n, &mut rng)
}
