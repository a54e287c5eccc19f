//! Binomial Markov-switching multifractal (MSM) volatility.
//!
//! `x_t = sigma * g(M_t)^{1/2} * eps_t` where `M_t` holds `K` independent
//! two-state multipliers taking `m0` or `m1 = 2 - m0` with equal stationary
//! probability, and `g` is their product. Level `k` is redrawn with
//! probability `lambda_k` each step, where
//!
//! ```text
//! lambda_k = 1 - (1 - lambda_K)^(b^(k - K)),   k = 1..K
//! ```
//!
//! so the fastest level `K` switches with probability `lambda_K` and each
//! slower level is slower by a factor of roughly `b`.
//!
//! The filter works on the full `2^K` state vector. State index `i` encodes
//! level `k` in bit `k - 1`: a clear bit means `m0`, a set bit `m1`. The
//! transition matrix is the Kronecker product of the per-level 2x2 matrices
//! and is applied one level at a time in `O(K 2^K)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::stats::LN_2PI;
use crate::SimRng;

/// Largest `K` accepted by default (65536 states).
pub const DEFAULT_MAX_LEVELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmParams {
    /// Number of multiplier levels `K`.
    pub levels: usize,
    /// High multiplier value, in `(1, 2)`.
    pub m0: f64,
    /// Frequency growth factor `b > 1`.
    pub growth: f64,
    /// Switching probability of the fastest level, in `(0, 1)`.
    pub lambda_top: f64,
    pub sigma: f64,
}

impl MsmParams {
    pub fn new(levels: usize, m0: f64, growth: f64, lambda_top: f64, sigma: f64) -> Result<Self> {
        let p = Self {
            levels,
            m0,
            growth,
            lambda_top,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::invalid("MSM needs at least one level"));
        }
        if !(self.m0 > 1.0 && self.m0 < 2.0) {
            return Err(Error::invalid(format!("m0 must lie in (1, 2), got {}", self.m0)));
        }
        if !(self.growth > 1.0) || !self.growth.is_finite() {
            return Err(Error::invalid(format!("b must exceed 1, got {}", self.growth)));
        }
        if !(self.lambda_top > 0.0 && self.lambda_top < 1.0) {
            return Err(Error::invalid(format!(
                "lambda_K must lie in (0, 1), got {}",
                self.lambda_top
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn m1(&self) -> f64 {
        2.0 - self.m0
    }

    pub fn switching_probabilities(&self) -> Vec<f64> {
        switching_ladder(self.lambda_top, self.growth, self.levels)
    }
}

/// `lambda_k = 1 - (1 - lambda_top)^(growth^(k - levels))` for `k = 1..=levels`.
pub fn switching_ladder(lambda_top: f64, growth: f64, levels: usize) -> Vec<f64> {
    let log_stay = (-lambda_top).ln_1p();
    (1..=levels)
        .map(|k| {
            let exponent = growth.powi(k as i32 - levels as i32);
            -(exponent * log_stay).exp_m1()
        })
        .collect()
}

/// Enumerated multiplier states with their volatility products.
#[derive(Debug, Clone)]
pub struct StateSpace {
    levels: usize,
    m0: f64,
    g: Vec<f64>,
    /// Number of levels at `m1` for each state.
    low_count: Vec<u8>,
    lambdas: Vec<f64>,
}

impl StateSpace {
    pub fn new(params: &MsmParams) -> Result<Self> {
        Self::with_cap(params, DEFAULT_MAX_LEVELS)
    }

    pub fn with_cap(params: &MsmParams, max_levels: usize) -> Result<Self> {
        params.validate()?;
        if params.levels > max_levels {
            return Err(Error::StateSpaceTooLarge {
                levels: params.levels,
                cap: max_levels,
            });
        }
        Self::from_ladder(params.m0, &params.switching_probabilities())
    }

    /// State space with an explicit per-level switching ladder; each
    /// `lambda_k` may be anywhere in `[0, 1]`.
    pub fn from_ladder(m0: f64, lambdas: &[f64]) -> Result<Self> {
        let levels = lambdas.len();
        if levels == 0 || levels > 30 {
            return Err(Error::invalid(format!("unsupported level count {levels}")));
        }
        if !(1.0..2.0).contains(&m0) {
            return Err(Error::invalid(format!("m0 must lie in [1, 2), got {m0}")));
        }
        if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::invalid(format!("switching probability {l} outside [0, 1]")));
        }
        let m1 = 2.0 - m0;
        let d = 1usize << levels;
        let low_count: Vec<u8> = (0..d).map(|i| (i as u32).count_ones() as u8).collect();
        let g = low_count
            .iter()
            .map(|&c| m0.powi(levels as i32 - c as i32) * m1.powi(c as i32))
            .collect();
        Ok(Self {
            levels,
            m0,
            g,
            low_count,
            lambdas: lambdas.to_vec(),
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Volatility products `g(m^i)`.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Multiplier vector of state `i`, slowest level first.
    pub fn multipliers(&self, i: usize) -> Vec<f64> {
        (0..self.levels)
            .map(|k| if i >> k & 1 == 0 { self.m0 } else { 2.0 - self.m0 })
            .collect()
    }

    /// `p <- p^T A` in place, one level at a time.
    pub fn transition_apply(&self, p: &mut [f64]) {
        debug_assert_eq!(p.len(), self.g.len());
        for (k, &lambda) in self.lambdas.iter().enumerate() {
            let half = 0.5 * lambda;
            let stay = 1.0 - half;
            let stride = 1usize << k;
            for block in p.chunks_exact_mut(2 * stride) {
                let (lo, hi) = block.split_at_mut(stride);
                for (a, c) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *c);
                    *a = stay * x + half * y;
                    *c = half * x + stay * y;
                }
            }
        }
    }
}

/// Conditional state probabilities `P(M_t = m^i | x_2..x_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    p: Vec<f64>,
}

impl FilterState {
    /// Uniform distribution: the stationary law of the multiplier chain.
    pub fn stationary(space: &StateSpace) -> Self {
        let d = space.len();
        Self {
            p: vec![1.0 / d as f64; d],
        }
    }

    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { p })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

/// Sequential filter: holds the state vector and scratch buffers so that
/// stepping allocates nothing.
#[derive(Debug, Clone)]
pub struct MsmFilter<'a> {
    space: &'a StateSpace,
    sigma: f64,
    p: Vec<f64>,
    /// `sigma^2 g` for each possible count of low multipliers.
    var_by_count: Vec<f64>,
    weight_by_count: Vec<f64>,
    steps: usize,
}

impl<'a> MsmFilter<'a> {
    pub fn new(space: &'a StateSpace, sigma: f64) -> Self {
        let levels = space.levels;
        let m1 = 2.0 - space.m0;
        let var_by_count = (0..=levels)
            .map(|c| sigma * sigma * space.m0.powi((levels - c) as i32) * m1.powi(c as i32))
            .collect();
        Self {
            space,
            sigma,
            p: FilterState::stationary(space).p,
            var_by_count,
            weight_by_count: vec![0.0; levels + 1],
            steps: 0,
        }
    }

    pub fn with_state(space: &'a StateSpace, sigma: f64, state: &FilterState) -> Result<Self> {
        if state.p.len() != space.len() {
            return Err(Error::invalid("filter state and state space differ in size"));
        }
        let mut f = Self::new(space, sigma);
        f.p.copy_from_slice(&state.p);
        Ok(f)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn state(&self) -> FilterState {
        FilterState { p: self.p.clone() }
    }

    /// Consumes one observation; returns `log p(x_t | x_2..x_{t-1})`.
    ///
    /// Gaussian weights are rescaled by their maximum before mixing, so the
    /// contribution is exact in log space even when every individual density
    /// underflows.
    pub fn step(&mut self, x: f64) -> Result<f64> {
        self.space.transition_apply(&mut self.p);
        let x2 = x * x;
        let mut max_log = f64::NEG_INFINITY;
        for (w, &var) in self.weight_by_count.iter_mut().zip(&self.var_by_count) {
            *w = -0.5 * (LN_2PI + var.ln() + x2 / var);
            max_log = max_log.max(*w);
        }
        for w in &mut self.weight_by_count {
            *w = (*w - max_log).exp();
        }
        let mut total = 0.0;
        for (pi, &c) in self.p.iter_mut().zip(&self.space.low_count) {
            *pi *= self.weight_by_count[c as usize];
            total += *pi;
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateObservation { index: self.steps });
        }
        let inv = total.recip();
        for pi in &mut self.p {
            *pi *= inv;
        }
        self.steps += 1;
        Ok(max_log + total.ln())
    }
}

/// One filter update on an explicit state: returns the posterior and the
/// predictive density `p(x_t | x_2..x_{t-1})` itself (not its log).
pub fn filter_step(
    state: &FilterState,
    x: f64,
    sigma: f64,
    space: &StateSpace,
) -> Result<(FilterState, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let mut f = MsmFilter::with_state(space, sigma, state)?;
    let log_density = f.step(x)?;
    let density = log_density.exp();
    if density == 0.0 {
        return Err(Error::DegenerateObservation { index: 0 });
    }
    Ok((f.state(), density))
}

/// Per-observation log predictive densities of `x`, starting from the
/// stationary distribution.
pub fn log_densities(x: &[f64], params: &MsmParams) -> Result<Vec<f64>> {
    let space = StateSpace::new(params)?;
    log_densities_with_space(x, params.sigma, &space)
}

pub fn log_densities_with_space(x: &[f64], sigma: f64, space: &StateSpace) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InsufficientData("empty observation sequence".into()));
    }
    let mut filter = MsmFilter::new(space, sigma);
    x.iter().map(|&v| filter.step(v)).collect()
}

pub fn log_likelihood(x: &[f64], params: &MsmParams) -> Result<f64> {
    Ok(log_densities(x, params)?.iter().sum())
}

/// Simulated observations together with the latent volatility product.
#[derive(Debug, Clone, PartialEq)]
pub struct MsmPath {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

/// Latent multiplier chain, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct MultiplierChain {
    m0: f64,
    lambdas: Vec<f64>,
    /// Bit `k` set means level `k + 1` currently sits at `m1`.
    state: u32,
}

impl MultiplierChain {
    /// Chain started from its stationary (uniform) law.
    pub fn stationary(m0: f64, lambdas: &[f64], rng: &mut SimRng) -> Self {
        let mut state = 0u32;
        for k in 0..lambdas.len() {
            if rng.random::<bool>() {
                state |= 1 << k;
            }
        }
        Self {
            m0,
            lambdas: lambdas.to_vec(),
            state,
        }
    }

    /// Redraws each level independently with probability `lambda_k`.
    pub fn advance(&mut self, rng: &mut SimRng) {
        for (k, &lambda) in self.lambdas.iter().enumerate() {
            if rng.random::<f64>() < lambda {
                if rng.random::<bool>() {
                    self.state |= 1 << k;
                } else {
                    self.state &= !(1 << k);
                }
            }
        }
    }

    pub fn state_index(&self) -> usize {
        self.state as usize
    }

    pub fn g(&self) -> f64 {
        let low = self.state.count_ones() as i32;
        let levels = self.lambdas.len() as i32;
        self.m0.powi(levels - low) * (2.0 - self.m0).powi(low)
    }
}

/// Simulates `n` observations; reproducible for a fixed seed.
pub fn simulate(params: &MsmParams, n: usize, seed: u64) -> Result<MsmPath> {
    params.validate()?;
    let mut rng = crate::seeded_rng(seed);
    Ok(simulate_with_ladder(
        params.m0,
        params.sigma,
        &params.switching_probabilities(),
        n,
        &mut rng,
    ))
}

/// Simulation with an explicit switching ladder (each `lambda_k` in `[0, 1]`).
pub fn simulate_with_ladder(
    m0: f64,
    sigma: f64,
    lambdas: &[f64],
    n: usize,
    rng: &mut SimRng,
) -> MsmPath {
    let mut chain = MultiplierChain::stationary(m0, lambdas, rng);
    let mut x = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            chain.advance(rng);
        }
        let gt = chain.g();
        let eps: f64 = rng.sample(StandardNormal);
        x.push(sigma * gt.sqrt() * eps);
        g.push(gt);
    }
    MsmPath { x, g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use proptest::prelude::*;
    use rand::Rng;

    /// Dense transition matrix built directly from the per-level redraw rule:
    /// a level keeps its value with probability `1 - lambda + lambda / 2`.
    fn dense_transition(lambdas: &[f64]) -> Vec<Vec<f64>> {
        let k = lambdas.len();
        let d = 1 << k;
        let mut a = vec![vec![0.0; d]; d];
        for (from, row) in a.iter_mut().enumerate() {
            for (to, cell) in row.iter_mut().enumerate() {
                let mut prob = 1.0;
                for (level, &lambda) in lambdas.iter().enumerate() {
                    let same = (from >> level & 1) == (to >> level & 1);
                    prob *= if same { 1.0 - lambda + 0.5 * lambda } else { 0.5 * lambda };
                }
                *cell = prob;
            }
        }
        a
    }

    fn random_probs(d: usize, rng: &mut SimRng) -> Vec<f64> {
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    #[test]
    fn k1_states() {
        let p = MsmParams::new(1, 1.5, 2.0, 0.5, 1.0).unwrap();
        let s = StateSpace::new(&p).unwrap();
        assert_eq!(s.g(), &[1.5, 0.5]);
    }

    #[test]
    fn k2_states_have_unit_mean() {
        let p = MsmParams::new(2, 1.5, 2.0, 0.5, 1.0).unwrap();
        let s = StateSpace::new(&p).unwrap();
        assert_eq!(s.g(), &[2.25, 0.75, 0.75, 0.25]);
        assert!((stats::mean(s.g()) - 1.0).abs() < 1e-15);
        assert_eq!(s.multipliers(1), vec![0.5, 1.5]);
    }

    #[test]
    fn tbm3_k9_ladder() {
        let p = MsmParams::new(9, 1.462, 3.864, 0.931, 0.06029).unwrap();
        let l = p.switching_probabilities();
        let expected_first = 1.0 - (1.0f64 - 0.931).powf(3.864f64.powi(-8));
        assert!((l[0] - expected_first).abs() < 1e-15);
        assert!((l[8] - 0.931).abs() < 1e-15);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert!(l.iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn state_cap() {
        let p = MsmParams::new(17, 1.5, 2.0, 0.5, 1.0).unwrap();
        assert!(matches!(StateSpace::new(&p), Err(Error::StateSpaceTooLarge { .. })));
        let p = MsmParams::new(5, 1.5, 2.0, 0.5, 1.0).unwrap();
        assert!(StateSpace::with_cap(&p, 4).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(MsmParams::new(3, 2.0, 2.0, 0.5, 1.0).is_err());
        assert!(MsmParams::new(3, 1.5, 1.0, 0.5, 1.0).is_err());
        assert!(MsmParams::new(3, 1.5, 2.0, 1.0, 1.0).is_err());
        assert!(MsmParams::new(3, 1.5, 2.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn uniform_is_stationary() {
        let s = StateSpace::from_ladder(1.4, &[0.1, 0.3, 0.7]).unwrap();
        let mut p = vec![0.125; 8];
        s.transition_apply(&mut p);
        assert!(p.iter().all(|v| (v - 0.125).abs() < 1e-16));
    }

    #[test]
    fn full_redraw_gives_uniform() {
        let s = StateSpace::from_ladder(1.4, &[1.0, 1.0, 1.0]).unwrap();
        let mut rng = crate::seeded_rng(1);
        let mut p = random_probs(8, &mut rng);
        s.transition_apply(&mut p);
        assert!(p.iter().all(|v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn kronecker_matches_dense() {
        let mut rng = crate::seeded_rng(2);
        for k in 1..=6 {
            let lambdas: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let space = StateSpace::from_ladder(1.3, &lambdas).unwrap();
            let a = dense_transition(&lambdas);
            for _ in 0..10 {
                let p = random_probs(1 << k, &mut rng);
                let mut fast = p.clone();
                space.transition_apply(&mut fast);
                for (j, v) in fast.iter().enumerate() {
                    let dense: f64 = (0..p.len()).map(|i| p[i] * a[i][j]).sum();
                    assert!((v - dense).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn degenerate_two_state_is_gaussian() {
        // m0 -> 1: both states carry variance sigma^2.
        let s = StateSpace::from_ladder(1.0, &[0.3]).unwrap();
        let prior = FilterState::from_probabilities(vec![0.3, 0.7]).unwrap();
        let (post, density) = filter_step(&prior, 0.4, 0.5, &s).unwrap();
        let expected = stats::normal_log_density(0.4, 0.25).exp();
        assert!((density - expected).abs() < 1e-15);
        // predicted = prior after transition; posterior equals it
        let mut predicted = vec![0.3, 0.7];
        s.transition_apply(&mut predicted);
        for (a, b) in post.probabilities().iter().zip(&predicted) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_observation_tilts_to_low_states() {
        let s = StateSpace::from_ladder(1.5, &[0.2, 0.6]).unwrap();
        let prior = FilterState::from_probabilities(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut predicted = prior.probabilities().to_vec();
        s.transition_apply(&mut predicted);
        let (post, _) = filter_step(&prior, 0.0, 1.0, &s).unwrap();
        let ratios: Vec<f64> = post
            .probabilities()
            .iter()
            .zip(&predicted)
            .zip(s.g())
            .map(|((a, b), g)| a / b * g.sqrt())
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_reduction() {
        let space = StateSpace::from_ladder(1.0, &[0.3, 0.5, 0.9]).unwrap();
        let x = [0.1, -0.3, 0.05, 0.8, -1.2];
        let ll: f64 = log_densities_with_space(&x, 0.7, &space).unwrap().iter().sum();
        let iid: f64 = x.iter().map(|v| stats::normal_log_density(*v, 0.49)).sum();
        assert!((ll - iid).abs() < 1e-12);
    }

    #[test]
    fn extreme_observation_is_finite() {
        let p = MsmParams::new(3, 1.9, 3.0, 0.5, 1e-3).unwrap();
        let ll = log_likelihood(&[1e3, 0.0, -1e3], &p).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn empty_input_rejected() {
        let p = MsmParams::new(2, 1.5, 3.0, 0.5, 1.0).unwrap();
        assert!(log_likelihood(&[], &p).is_err());
    }

    #[test]
    fn frozen_chain() {
        let mut rng = crate::seeded_rng(4);
        let path = simulate_with_ladder(1.5, 0.1, &[0.0, 0.0, 0.0], 500, &mut rng);
        assert!(path.g.iter().all(|g| *g == path.g[0]));
    }

    #[test]
    fn simulation_is_reproducible() {
        let p = MsmParams::new(4, 1.5, 3.0, 0.5, 0.1).unwrap();
        assert_eq!(simulate(&p, 300, 9).unwrap(), simulate(&p, 300, 9).unwrap());
        assert_ne!(simulate(&p, 300, 9).unwrap(), simulate(&p, 300, 10).unwrap());
    }

    #[test]
    fn ergodic_mean_of_g() {
        let p = MsmParams::new(3, 1.4, 2.0, 0.8, 1.0).unwrap();
        let path = simulate(&p, 200_000, 5).unwrap();
        let mean = stats::mean(&path.g);
        // Var[g] = E[M^2]^K - 1; correlation inflates the standard error,
        // bound it with the slowest level's persistence.
        let var_g = (0.5 * (1.4f64.powi(2) + 0.6f64.powi(2))).powi(3) - 1.0;
        let slowest = p.switching_probabilities()[0];
        let inflation = 2.0 / slowest;
        let se = (var_g * inflation / path.g.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} (se {se})");
    }

    #[test]
    fn true_params_beat_perturbed_on_average() {
        let truth = MsmParams::new(3, 1.6, 3.0, 0.5, 1.0).unwrap();
        let perturbed = MsmParams::new(3, 1.3, 3.0, 0.5, 1.0).unwrap();
        let mut wins = 0;
        let mut diff_sum = 0.0;
        for rep in 0..100 {
            let path = simulate(&truth, 500, 1000 + rep).unwrap();
            let a = log_likelihood(&path.x, &truth).unwrap();
            let b = log_likelihood(&path.x, &perturbed).unwrap();
            diff_sum += a - b;
            if a > b {
                wins += 1;
            }
        }
        assert!(diff_sum > 0.0);
        assert!(wins > 50, "{wins}");
    }

    proptest! {
        #[test]
        fn filter_keeps_probability(
            xs in proptest::collection::vec(-3.0f64..3.0, 1..30),
            m0 in 1.05f64..1.95,
            lambda in 0.01f64..0.99,
        ) {
            let p = MsmParams::new(4, m0, 2.5, lambda, 0.8).unwrap();
            let space = StateSpace::new(&p).unwrap();
            let mut f = MsmFilter::new(&space, p.sigma);
            for x in xs {
                f.step(x).unwrap();
                let s = f.state();
                let total: f64 = s.probabilities().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
                prop_assert!(s.probabilities().iter().all(|v| *v >= 0.0));
            }
        }

        #[test]
        fn transition_preserves_mass(seed in 0u64..1000, k in 1usize..8) {
            let mut rng = crate::seeded_rng(seed);
            let lambdas: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let space = StateSpace::from_ladder(1.5, &lambdas).unwrap();
            let mut p = random_probs(1 << k, &mut rng);
            space.transition_apply(&mut p);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
        }
    }
}
