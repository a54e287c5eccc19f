//! Level jump-diffusion with GARCH(1,1) diffusive variance and a
//! level-dependent jump probability.
//!
//! ```text
//! dr_t = mu(r_{t-1}) + r_{t-1}^gamma (sqrt(h_t) eps_t + J_t tau z_t)
//! P(J_t = 1) = 1 / (1 + exp(-c - d r_{t-1}))
//! h_t = a0 + a1 u_{t-1}^2 + b h_{t-1},   u_t = (dr_t - mu(r_{t-1})) / r_{t-1}^gamma
//! ```
//!
//! The jump indicator is integrated out, so each step contributes a
//! two-component normal mixture. The recursion needs `u_{t-1}`, hence
//! `r_{t-2}`: the first two levels are pre-sample values and the
//! log-likelihood sums `t = 3..n` (addends start at series index 2). The
//! pre-sample `h_2` is the sample variance of the normalized increments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::garch::VarianceInit;
use crate::level::DriftSpec;
use crate::loglik::LogDensities;
use crate::market_data::{normalized_increments, RateSeries};
use crate::stats::{self, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDiffParams {
    pub drift: DriftSpec,
    pub gamma: f64,
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    /// Jump-probability intercept.
    pub c: f64,
    /// Jump-probability slope in the lagged level.
    pub d: f64,
    /// Jump-size standard deviation (in normalized units).
    pub tau: f64,
}

impl JumpDiffParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0) || !self.a0.is_finite() {
            return Err(Error::invalid(format!("a0 must be positive, got {}", self.a0)));
        }
        if !(self.a1 >= 0.0) || !(self.b >= 0.0) {
            return Err(Error::invalid("a1 and b must be nonnegative"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.c.is_nan() || self.d.is_nan() {
            return Err(Error::invalid("c and d must be numbers"));
        }
        Ok(())
    }

    pub fn jump_probability(&self, r_prev: f64) -> f64 {
        jump_probability(self.c, self.d, r_prev)
    }
}

pub fn jump_probability(c: f64, d: f64, r_prev: f64) -> f64 {
    stats::logistic(c + d * r_prev)
}

/// `log(1 / (1 + exp(-z)))` without overflow.
fn log_logistic(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Log of `(1 - lambda) n(e | s2 h) + lambda n(e | s2 (h + tau^2))` with
/// `lambda = logistic(z)`.
pub fn mixture_log_density(e: f64, s2: f64, h: f64, tau: f64, z: f64) -> f64 {
    let v0 = s2 * h;
    let v1 = s2 * (h + tau * tau);
    let l0 = log_logistic(-z) - 0.5 * (LN_2PI + v0.ln() + e * e / v0);
    let l1 = log_logistic(z) - 0.5 * (LN_2PI + v1.ln() + e * e / v1);
    let m = l0.max(l1);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((l0 - m).exp() + (l1 - m).exp()).ln()
}

pub fn jumpdiff_log_densities(
    series: &RateSeries,
    params: &JumpDiffParams,
    init: VarianceInit,
) -> Result<LogDensities> {
    params.validate()?;
    series.check_positive()?;
    if series.len() < 3 {
        return Err(Error::InsufficientData(
            "jump-diffusion needs at least 3 levels".into(),
        ));
    }
    let d = &params.drift;
    let u = normalized_increments(series, d.alpha0, d.alpha1(), params.gamma)?;
    let r = series.values();
    let mut h_prev = stats::variance(&u);
    if init == VarianceInit::Unconditional && params.a1 + params.b < 1.0 {
        h_prev = params.a0 / (1.0 - params.a1 - params.b);
    }
    let mut values = Vec::with_capacity(u.len() - 1);
    // u[j] belongs to series index j + 1.
    for j in 1..u.len() {
        let h = params.a0 + params.a1 * u[j - 1] * u[j - 1] + params.b * h_prev;
        let r_prev = r[j];
        let e = r[j + 1] - r_prev - d.mean_increment(r_prev);
        let s2 = r_prev.powf(2.0 * params.gamma);
        let z = params.c + params.d * r_prev;
        let lf = mixture_log_density(e, s2, h, params.tau, z);
        if !lf.is_finite() {
            return Err(Error::DegenerateObservation { index: j + 1 });
        }
        values.push(lf);
        h_prev = h;
    }
    Ok(LogDensities::new(2, values))
}

pub fn jumpdiff_loglik(series: &RateSeries, params: &JumpDiffParams) -> Result<f64> {
    Ok(jumpdiff_log_densities(series, params, VarianceInit::default())?.total())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub series: RateSeries,
    /// Jump indicator for each simulated step (series indices 2..).
    pub jumps: Vec<bool>,
    pub redraws: usize,
    pub truncated: bool,
}

/// Simulates `n` steps after the pre-sample levels `r1, r2`. Every attempt
/// consumes a uniform, then the diffusive shock, then the jump size, so
/// paths with `tau = 0` coincide with no-jump paths for the same seed.
pub fn jumpdiff_simulate(
    params: &JumpDiffParams,
    r1: f64,
    r2: f64,
    n: usize,
    seed: u64,
) -> Result<JumpPath> {
    params.validate()?;
    for (index, value) in [(0, r1), (1, r2)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveLevel { index, value });
        }
    }
    let mut rng = crate::seeded_rng(seed);
    let drift = &params.drift;
    let persistence = params.a1 + params.b;
    let mut h_prev = if persistence < 1.0 {
        params.a0 / (1.0 - persistence)
    } else {
        params.a0
    };
    let mut u_prev = (r2 - r1 - drift.mean_increment(r1)) / r1.powf(params.gamma);
    let mut levels = Vec::with_capacity(n + 2);
    levels.extend([r1, r2]);
    let mut jumps = Vec::with_capacity(n);
    let mut redraws = 0;
    let mut truncated = false;
    let mut r = r2;
    'steps: for t in 0..n {
        let h = params.a0 + params.a1 * u_prev * u_prev + params.b * h_prev;
        let lambda = params.jump_probability(r);
        let scale = r.powf(params.gamma);
        let mean = r + drift.mean_increment(r);
        let mut attempts = 0;
        loop {
            let jump = rng.random::<f64>() < lambda;
            let eps: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            let u = h.sqrt() * eps + if jump { params.tau * z } else { 0.0 };
            let next = mean + scale * u;
            if next > 0.0 && next.is_finite() {
                levels.push(next);
                jumps.push(jump);
                u_prev = u;
                h_prev = h;
                r = next;
                break;
            }
            attempts += 1;
            redraws += 1;
            if attempts >= crate::level::MAX_REDRAWS {
                log::warn!("jump-diffusion path truncated at step {}", t + 1);
                truncated = true;
                break 'steps;
            }
        }
    }
    Ok(JumpPath {
        series: RateSeries::from_values(levels)?,
        jumps,
        redraws,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{cev_log_densities, CevParams, Innovation};

    fn base() -> JumpDiffParams {
        JumpDiffParams {
            drift: DriftSpec::constant(0.001),
            gamma: 0.3,
            a0: 2e-4,
            a1: 0.1,
            b: 0.8,
            c: -2.5,
            d: 0.1,
            tau: 0.1,
        }
    }

    fn table6_niborm3() -> JumpDiffParams {
        JumpDiffParams {
            drift: DriftSpec::constant(1.085e-3),
            gamma: 1.872,
            a0: 0.0436e-6,
            a1: 0.1291,
            b: 0.8301,
            c: -1.883,
            d: -0.2119,
            tau: 0.01127,
        }
    }

    #[test]
    fn hand_evaluated_mixture() {
        // dr = 0.1, r_{t-1} = 1, gamma = 0, h = 0.01, tau = 0.2, lambda = 0.5
        let got = mixture_log_density(0.1, 1.0, 0.01, 0.2, 0.0).exp();
        let n = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let expected = 0.5 * n(0.1, 0.01) + 0.5 * n(0.1, 0.05);
        assert!((got - expected).abs() < 1e-13);
    }

    #[test]
    fn no_jump_reduction() {
        let s = jumpdiff_simulate(&base(), 3.0, 3.01, 500, 1).unwrap().series;
        let mut p = base();
        p.a1 = 0.0;
        p.b = 0.0;
        p.c = -1e4;
        let jump = jumpdiff_log_densities(&s, &p, VarianceInit::default()).unwrap();
        let cev = CevParams {
            drift: p.drift,
            gamma: p.gamma,
            sigma: p.a0.sqrt(),
            innovation: Innovation::Normal,
        };
        let reference = cev_log_densities(&s, &cev).unwrap();
        assert_eq!(jump.first_index, 2);
        let aligned = reference.window(2, reference.end_index()).unwrap();
        assert_eq!(aligned.len(), jump.len());
        let diff = jump.total() - aligned.iter().sum::<f64>();
        assert!(diff.abs() < 1e-10, "{diff}");
    }

    #[test]
    fn per_step_density_integrates_to_one() {
        let (s2, h, tau, z): (f64, f64, f64, f64) = (1.7, 0.02, 0.3, -0.4);
        let sd = (s2 * (h + tau * tau)).sqrt();
        let (lo, hi) = (-12.0 * sd, 12.0 * sd);
        let steps = 200_000;
        let dx = (hi - lo) / steps as f64;
        // Simpson's rule
        let mut acc = 0.0;
        for i in 0..=steps {
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * mixture_log_density(lo + i as f64 * dx, s2, h, tau, z).exp();
        }
        assert!((acc * dx / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_dominates_weighted_components() {
        let z: f64 = 0.7;
        let lambda = stats::logistic(z);
        for e in [-1.0, -0.1, 0.0, 0.05, 0.8] {
            let mix = mixture_log_density(e, 0.5, 0.04, 0.3, z);
            let c0 = (1.0 - lambda).ln() + stats::normal_log_density(e, 0.02);
            let c1 = lambda.ln() + stats::normal_log_density(e, 0.5 * (0.04 + 0.09));
            assert!(mix >= c0 && mix >= c1);
        }
    }

    #[test]
    fn jump_probability_monotone_in_level() {
        for (d, increasing) in [(0.3, true), (-0.3, false)] {
            let probs: Vec<f64> = (0..20).map(|i| jump_probability(-1.0, d, i as f64)).collect();
            assert!(probs.windows(2).all(|w| (w[1] > w[0]) == increasing));
        }
    }

    #[test]
    fn continuous_in_jump_parameters() {
        let s = jumpdiff_simulate(&base(), 3.0, 3.01, 300, 2).unwrap().series;
        let ll = jumpdiff_loglik(&s, &base()).unwrap();
        for bump in [
            |p: &mut JumpDiffParams| p.c += 1e-8,
            |p: &mut JumpDiffParams| p.d += 1e-8,
            |p: &mut JumpDiffParams| p.tau += 1e-8,
        ] {
            let mut p = base();
            bump(&mut p);
            let moved = jumpdiff_loglik(&s, &p).unwrap();
            assert!((moved - ll).abs() < 1e-4);
        }
    }

    #[test]
    fn constant_jump_frequency() {
        let mut p = base();
        p.d = 0.0;
        p.c = -1.5;
        let path = jumpdiff_simulate(&p, 3.0, 3.0, 50_000, 3).unwrap();
        let freq = path.jumps.iter().filter(|j| **j).count() as f64 / path.jumps.len() as f64;
        let lambda = stats::logistic(-1.5);
        let se = (lambda * (1.0 - lambda) / path.jumps.len() as f64).sqrt();
        assert!((freq - lambda).abs() < 3.0 * se, "{freq} vs {lambda}");
    }

    #[test]
    fn zero_size_jumps_match_no_jump_path() {
        let mut a = base();
        a.tau = 0.0;
        let mut b = base();
        b.c = -1e6;
        let pa = jumpdiff_simulate(&a, 3.0, 3.02, 1000, 4).unwrap();
        let pb = jumpdiff_simulate(&b, 3.0, 3.02, 1000, 4).unwrap();
        assert_eq!(pa.series, pb.series);
    }

    #[test]
    fn negative_slope_lowers_jump_frequency_with_level() {
        let p = table6_niborm3();
        let path = jumpdiff_simulate(&p, 5.0, 5.0, 200_000, 5).unwrap();
        let levels = &path.series.values()[2..];
        let mut pairs: Vec<(f64, bool)> = path
            .series
            .values()
            .iter()
            .skip(1)
            .zip(&path.jumps)
            .map(|(r, j)| (*r, *j))
            .collect();
        assert_eq!(levels.len(), pairs.len());
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let third = pairs.len() / 3;
        let freq = |s: &[(f64, bool)]| s.iter().filter(|p| p.1).count() as f64 / s.len() as f64;
        let low = freq(&pairs[..third]);
        let mid = freq(&pairs[third..2 * third]);
        let high = freq(&pairs[2 * third..]);
        assert!(low > mid && mid > high, "{low} {mid} {high}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut p = base();
        p.tau = -0.1;
        assert!(jumpdiff_simulate(&p, 1.0, 1.0, 10, 1).is_err());
        assert!(jumpdiff_simulate(&base(), 1.0, 0.0, 10, 1).is_err());
        let s = RateSeries::from_values(vec![1.0, 1.1]).unwrap();
        assert!(jumpdiff_loglik(&s, &base()).is_err());
    }

    #[test]
    fn extreme_logit_is_finite() {
        assert!(mixture_log_density(0.1, 1.0, 0.01, 0.2, 800.0).is_finite());
        assert!(mixture_log_density(0.1, 1.0, 0.01, 0.2, -800.0).is_finite());
    }
}
