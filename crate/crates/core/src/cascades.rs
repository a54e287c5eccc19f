//! Multifractal random measures, their analytic scaling functions, trading
//! time composition with Brownian motion, and the discrete geometric-time
//! construction that produces MSM innovations.
//!
//! Scaling functions follow one convention throughout: `T(q)` is the
//! measure's scaling function and the composed process has
//! `zeta(q) = 1 - T(q / 2)`. With that convention
//!
//! * dyadic Bernoulli: `T(q) = log2(p^q + (1 - p)^q)`,
//! * b-adic cascade (`E[M] = 1/b`): `T(q) = 1 + log_b E[M^q]`,
//! * Poisson multifractal (`E[M] = 1`): `T(q) = 1 - q + log_b E[M^q]`,
//!
//! so `zeta(2) = 1` for every normalized multiplier law.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::msm::switching_ladder;
use crate::SimRng;

/// Largest number of cells a realization may hold.
pub const MAX_CELLS: usize = 1 << 26;

/// Distribution of a positive cascade multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierLaw {
    Constant(f64),
    /// `low` or `high` with probability 1/2 each.
    TwoPoint { low: f64, high: f64 },
    /// `exp(N(mu, sigma^2))`.
    LogNormal { mu: f64, sigma: f64 },
}

impl MultiplierLaw {
    /// `{m0, 2 - m0}` equiprobable, mean 1.
    pub fn binomial(m0: f64) -> Result<Self> {
        if !(1.0..2.0).contains(&m0) {
            return Err(Error::invalid(format!("m0 must lie in [1, 2), got {m0}")));
        }
        Ok(MultiplierLaw::TwoPoint {
            low: 2.0 - m0,
            high: m0,
        })
    }

    /// Log-normal law with the given mean and log-scale `sigma`.
    pub fn lognormal_with_mean(mean: f64, sigma: f64) -> Result<Self> {
        if !(mean > 0.0) || !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("log-normal multiplier needs mean > 0 and sigma >= 0"));
        }
        Ok(MultiplierLaw::LogNormal {
            mu: mean.ln() - 0.5 * sigma * sigma,
            sigma,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MultiplierLaw::Constant(c) => c > 0.0 && c.is_finite(),
            MultiplierLaw::TwoPoint { low, high } => {
                low > 0.0 && high > 0.0 && low.is_finite() && high.is_finite()
            }
            MultiplierLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("multiplier law {self:?} is not positive")))
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            MultiplierLaw::Constant(c) => c,
            MultiplierLaw::TwoPoint { low, high } => {
                if rng.random::<bool>() {
                    high
                } else {
                    low
                }
            }
            MultiplierLaw::LogNormal { mu, sigma } => {
                (mu + sigma * rng.sample::<f64, _>(StandardNormal)).exp()
            }
        }
    }

    /// `E[M^q]`.
    pub fn moment(&self, q: f64) -> f64 {
        match *self {
            MultiplierLaw::Constant(c) => c.powf(q),
            MultiplierLaw::TwoPoint { low, high } => 0.5 * (low.powf(q) + high.powf(q)),
            MultiplierLaw::LogNormal { mu, sigma } => (q * mu + 0.5 * q * q * sigma * sigma).exp(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    DyadicBernoulli { p: f64 },
    BAdic { b: usize },
    Poisson { b: f64, l1: f64 },
    /// Resampled onto a uniform grid.
    Regridded,
}

/// Cell masses of a random measure on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRealization {
    pub kind: MeasureKind,
    pub depth: usize,
    /// Cell boundaries, `masses.len() + 1` of them, from 0 to `T`.
    pub boundaries: Vec<f64>,
    pub masses: Vec<f64>,
    /// Number of cells after each construction level.
    pub cells_per_level: Vec<usize>,
}

impl MeasureRealization {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.boundaries.last().unwrap_or(&0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Cumulative mass `Theta` at each boundary.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.masses.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for m in &self.masses {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// Masses of `cells` equal-length cells, treating the measure as
    /// uniform within each original cell.
    pub fn regrid(&self, cells: usize) -> Result<MeasureRealization> {
        if cells == 0 || cells > MAX_CELLS {
            return Err(Error::invalid(format!("cannot regrid onto {cells} cells")));
        }
        let horizon = self.horizon();
        let cum = self.cumulative();
        let theta_at = |t: f64, j: &mut usize| -> f64 {
            while *j + 1 < self.boundaries.len() - 1 && self.boundaries[*j + 1] <= t {
                *j += 1;
            }
            let (a, c) = (self.boundaries[*j], self.boundaries[*j + 1]);
            let frac = if c > a { ((t - a) / (c - a)).clamp(0.0, 1.0) } else { 1.0 };
            cum[*j] + frac * self.masses[*j]
        };
        let mut j = 0;
        let mut prev = 0.0;
        let mut boundaries = Vec::with_capacity(cells + 1);
        let mut masses = Vec::with_capacity(cells);
        boundaries.push(0.0);
        for i in 1..=cells {
            let t = horizon * i as f64 / cells as f64;
            let v = if i == cells { cum[cum.len() - 1] } else { theta_at(t, &mut j) };
            masses.push((v - prev).max(0.0));
            boundaries.push(t);
            prev = v;
        }
        Ok(MeasureRealization {
            kind: MeasureKind::Regridded,
            depth: self.depth,
            boundaries,
            masses,
            cells_per_level: vec![cells],
        })
    }
}

fn check_horizon(total_time: f64) -> Result<()> {
    if total_time > 0.0 && total_time.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("horizon must be positive, got {total_time}")))
    }
}

fn uniform_boundaries(cells: usize, total_time: f64) -> Vec<f64> {
    (0..=cells)
        .map(|i| total_time * i as f64 / cells as f64)
        .collect()
}

/// Randomized dyadic Bernoulli measure: at each of `depth` levels every cell
/// passes fractions `p` and `1 - p` to its two halves in random order.
pub fn dyadic_bernoulli(p: f64, depth: usize, total_time: f64, seed: u64) -> Result<MeasureRealization> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if depth == 0 || depth > 26 {
        return Err(Error::invalid(format!("depth must lie in 1..=26, got {depth}")));
    }
    check_horizon(total_time)?;
    let mut rng = crate::seeded_rng(seed);
    let mut masses = vec![1.0];
    let mut cells_per_level = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut next = Vec::with_capacity(masses.len() * 2);
        for m in masses {
            let (a, b) = if rng.random::<bool>() { (p, 1.0 - p) } else { (1.0 - p, p) };
            next.push(m * a);
            next.push(m * b);
        }
        masses = next;
        cells_per_level.push(masses.len());
    }
    Ok(MeasureRealization {
        kind: MeasureKind::DyadicBernoulli { p },
        depth,
        boundaries: uniform_boundaries(masses.len(), total_time),
        masses,
        cells_per_level,
    })
}

/// b-adic multiplicative cascade truncated at `depth`, with the tail
/// correction factor set to 1. The law should satisfy `E[M] = 1/b`.
pub fn badic_cascade(
    b: usize,
    law: &MultiplierLaw,
    depth: usize,
    total_time: f64,
    seed: u64,
) -> Result<MeasureRealization> {
    if b < 2 {
        return Err(Error::invalid(format!("b must be at least 2, got {b}")));
    }
    law.validate()?;
    check_horizon(total_time)?;
    let cells = (b as f64).powi(depth as i32);
    if depth == 0 || cells > MAX_CELLS as f64 {
        return Err(Error::invalid(format!("{b}^{depth} cells is out of range")));
    }
    if (law.mean() * b as f64 - 1.0).abs() > 1e-9 {
        log::warn!(
            "b-adic multiplier mean {} differs from 1/b = {}",
            law.mean(),
            1.0 / b as f64
        );
    }
    let mut rng = crate::seeded_rng(seed);
    let mut masses = vec![1.0];
    let mut cells_per_level = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut next = Vec::with_capacity(masses.len() * b);
        for m in masses {
            for _ in 0..b {
                next.push(m * law.sample(&mut rng));
            }
        }
        masses = next;
        cells_per_level.push(masses.len());
    }
    Ok(MeasureRealization {
        kind: MeasureKind::BAdic { b },
        depth,
        boundaries: uniform_boundaries(masses.len(), total_time),
        masses,
        cells_per_level,
    })
}

/// Poisson multifractal measure with `levels` levels: each level-`k` cell is
/// cut by a Poisson process of rate `l1 * b^(k-1)` and every piece gets an
/// independent multiplier. Final masses are `(length / T) * product`. The
/// law should satisfy `E[M] = 1` and `E[M^2] < b`.
pub fn poisson_multifractal(
    b: f64,
    l1: f64,
    law: &MultiplierLaw,
    levels: usize,
    total_time: f64,
    seed: u64,
) -> Result<MeasureRealization> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::invalid(format!("b must exceed 1, got {b}")));
    }
    if !(l1 > 0.0) || !l1.is_finite() {
        return Err(Error::invalid(format!("l1 must be positive, got {l1}")));
    }
    if levels == 0 {
        return Err(Error::invalid("need at least one level"));
    }
    law.validate()?;
    check_horizon(total_time)?;
    let expected_cells = 1.0 + l1 * total_time * b.powi(levels as i32 - 1) * b / (b - 1.0);
    if expected_cells > MAX_CELLS as f64 / 2.0 {
        return Err(Error::invalid(format!(
            "about {expected_cells:.0} cells expected, more than the {MAX_CELLS} cap allows"
        )));
    }
    if (law.mean() - 1.0).abs() > 1e-9 {
        log::warn!("Poisson multiplier mean {} differs from 1", law.mean());
    }
    if law.moment(2.0) >= b {
        log::warn!(
            "E[M^2] = {} >= b = {b}: the limiting measure degenerates",
            law.moment(2.0)
        );
    }
    let mut rng = crate::seeded_rng(seed);
    // (start, end, product of multipliers)
    let mut cells: Vec<(f64, f64, f64)> = vec![(0.0, total_time, 1.0)];
    let mut cells_per_level = Vec::with_capacity(levels);
    for k in 1..=levels {
        let rate = l1 * b.powi(k as i32 - 1);
        let mut next = Vec::with_capacity(cells.len() * 2);
        for (start, end, prod) in cells {
            let mut left = start;
            loop {
                let u: f64 = rng.random();
                let cut = left - (1.0 - u).ln() / rate;
                let right = cut.min(end);
                next.push((left, right, prod * law.sample(&mut rng)));
                if cut >= end {
                    break;
                }
                left = cut;
            }
        }
        cells = next;
        cells_per_level.push(cells.len());
    }
    let mut boundaries = Vec::with_capacity(cells.len() + 1);
    boundaries.push(0.0);
    let masses = cells
        .iter()
        .map(|&(s, e, p)| {
            boundaries.push(e);
            (e - s) / total_time * p
        })
        .collect();
    Ok(MeasureRealization {
        kind: MeasureKind::Poisson { b, l1 },
        depth: levels,
        boundaries,
        masses,
        cells_per_level,
    })
}

/// Path of Brownian motion run in the measure's trading time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPath {
    pub times: Vec<f64>,
    /// `X` at each time, starting from 0.
    pub values: Vec<f64>,
}

impl ComposedPath {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `X = sigma * sqrt(T) * B(Theta(t))` at the cell boundaries: independent
/// Gaussian increments with variance `sigma^2 * T * mass`.
pub fn mmar_compose(measure: &MeasureRealization, sigma: f64, seed: u64) -> Result<ComposedPath> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if measure.masses.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::invalid("measure has negative cell masses"));
    }
    let mut rng = crate::seeded_rng(seed);
    let scale = sigma * measure.horizon().sqrt();
    let mut values = Vec::with_capacity(measure.len() + 1);
    let mut x = 0.0;
    values.push(x);
    for m in &measure.masses {
        x += scale * m.sqrt() * rng.sample::<f64, _>(StandardNormal);
        values.push(x);
    }
    Ok(ComposedPath {
        times: measure.boundaries.clone(),
        values,
    })
}

/// Analytic scaling function of one construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingFunction {
    Dyadic { p: f64 },
    BAdic { b: f64, law: MultiplierLaw },
    Poisson { b: f64, law: MultiplierLaw },
}

pub fn dyadic_scaling(p: f64) -> Result<ScalingFunction> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(ScalingFunction::Dyadic { p })
}

pub fn badic_scaling(b: usize, law: MultiplierLaw) -> Result<ScalingFunction> {
    if b < 2 {
        return Err(Error::invalid("b must be at least 2"));
    }
    law.validate()?;
    Ok(ScalingFunction::BAdic { b: b as f64, law })
}

pub fn poisson_scaling(b: f64, law: MultiplierLaw) -> Result<ScalingFunction> {
    if !(b > 1.0) {
        return Err(Error::invalid("b must exceed 1"));
    }
    law.validate()?;
    Ok(ScalingFunction::Poisson { b, law })
}

impl ScalingFunction {
    /// Measure scaling function `T(q)`.
    pub fn measure(&self, q: f64) -> f64 {
        match *self {
            ScalingFunction::Dyadic { p } => (p.powf(q) + (1.0 - p).powf(q)).log2(),
            ScalingFunction::BAdic { b, law } => 1.0 + law.moment(q).ln() / b.ln(),
            ScalingFunction::Poisson { b, law } => 1.0 - q + law.moment(q).ln() / b.ln(),
        }
    }

    /// Process scaling function `zeta(q) = 1 - T(q / 2)`.
    pub fn zeta(&self, q: f64) -> f64 {
        1.0 - self.measure(q / 2.0)
    }

    /// `zeta((a + c) / 2) >= (zeta(a) + zeta(c)) / 2` for every pair of grid
    /// points.
    pub fn is_midpoint_concave(&self, grid: &[f64]) -> bool {
        grid.iter().enumerate().all(|(i, &a)| {
            grid[i + 1..].iter().all(|&c| {
                let mid = self.zeta(0.5 * (a + c));
                let chord = 0.5 * (self.zeta(a) + self.zeta(c));
                mid >= chord - 1e-12 * chord.abs().max(1.0)
            })
        })
    }

    /// Legendre transform `inf_q (alpha q - T(q))` over a grid of `q`.
    pub fn spectrum(&self, alpha: f64, q_grid: &[f64]) -> f64 {
        q_grid
            .iter()
            .map(|&q| alpha * q - self.measure(q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// How level-`k` renewals relate to the level above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutRule {
    /// Geometric waiting times restart inside every parent interval, so a
    /// renewal at level `k` forces one at all finer levels.
    #[default]
    Nested,
    /// Each level renews on its own, as in the MSM transition.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub growth: f64,
    pub lambda_top: f64,
    pub levels: usize,
    pub law: MultiplierLaw,
    pub sigma: f64,
    pub cut_rule: CutRule,
}

/// Innovations from the discrete geometric-time construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    pub x: Vec<f64>,
    /// Product of the level multipliers at each step.
    pub g: Vec<f64>,
    /// Renewals after time 0, per level (slowest first).
    pub renewals: Vec<usize>,
}

/// `lambda_K` from the slowest-level probability `lambda_1`:
/// `1 - (1 - lambda_1)^(b^(K-1))`.
pub fn lambda_top_from_lowest(lambda_1: f64, growth: f64, levels: usize) -> f64 {
    let e = growth.powi(levels as i32 - 1);
    -(e * (-lambda_1).ln_1p()).exp_m1()
}

/// Simulates `n` innovations `x_t = sigma * sqrt(prod_k M_{k,t}) * eps_t`
/// where level `k` draws a fresh multiplier after geometric waiting times
/// with success probability `lambda_k` from the MSM ladder.
pub fn discretize_to_msm(spec: &Discretization, n: usize, seed: u64) -> Result<DiscretePath> {
    if spec.levels == 0 {
        return Err(Error::invalid("need at least one level"));
    }
    if !(spec.growth > 1.0) || !(spec.lambda_top > 0.0 && spec.lambda_top <= 1.0) {
        return Err(Error::invalid("need b > 1 and lambda_K in (0, 1]"));
    }
    if !(spec.sigma > 0.0) || !spec.sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive"));
    }
    spec.law.validate()?;
    let lambdas = switching_ladder(spec.lambda_top, spec.growth, spec.levels);
    let mut rng = crate::seeded_rng(seed);
    let mut current: Vec<f64> = (0..spec.levels).map(|_| spec.law.sample(&mut rng)).collect();
    let mut renewals = vec![0; spec.levels];
    let mut x = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            let mut parent_cut = false;
            for k in 0..spec.levels {
                let own = rng.random::<f64>() < lambdas[k];
                let cut = match spec.cut_rule {
                    CutRule::Nested => own || parent_cut,
                    CutRule::Independent => own,
                };
                if cut {
                    current[k] = spec.law.sample(&mut rng);
                    renewals[k] += 1;
                }
                parent_cut = cut;
            }
        }
        let prod: f64 = current.iter().product();
        g.push(prod);
        x.push(spec.sigma * prod.sqrt() * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(DiscretePath { x, g, renewals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use proptest::prelude::*;

    #[test]
    fn symmetric_dyadic_is_uniform() {
        let m = dyadic_bernoulli(0.5, 8, 1.0, 1).unwrap();
        assert_eq!(m.len(), 256);
        assert!(m.masses.iter().all(|v| (*v - 1.0 / 256.0).abs() < 1e-15));
    }

    #[test]
    fn one_split() {
        let mut seen = [false; 2];
        for seed in 0..20 {
            let m = dyadic_bernoulli(0.3, 1, 2.0, seed).unwrap();
            let mut sorted = m.masses.clone();
            sorted.sort_by(f64::total_cmp);
            assert!((sorted[0] - 0.3).abs() < 1e-15 && (sorted[1] - 0.7).abs() < 1e-15);
            seen[(m.masses[0] > 0.5) as usize] = true;
            assert_eq!(m.boundaries, vec![0.0, 1.0, 2.0]);
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn dyadic_scaling_values() {
        let s = dyadic_scaling(0.5).unwrap();
        for q in [0.5, 1.0, 2.0, 3.0, 5.0] {
            assert!((s.zeta(q) - q / 2.0).abs() < 1e-12);
        }
        for p in [0.1, 0.3, 0.45] {
            assert!((dyadic_scaling(p).unwrap().zeta(2.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_two_is_one_for_normalized_laws() {
        let b = 3;
        let ln = MultiplierLaw::lognormal_with_mean(1.0 / b as f64, 0.4).unwrap();
        assert!((badic_scaling(b, ln).unwrap().zeta(2.0) - 1.0).abs() < 1e-12);
        let c = MultiplierLaw::Constant(0.5);
        let s = badic_scaling(2, c).unwrap();
        assert!((s.zeta(3.0) - 1.5).abs() < 1e-12);
        let bin = MultiplierLaw::binomial(1.4).unwrap();
        let p = poisson_scaling(3.0, bin).unwrap();
        assert!((p.zeta(2.0) - 1.0).abs() < 1e-12);
        let ln1 = MultiplierLaw::lognormal_with_mean(1.0, 0.3).unwrap();
        assert!((poisson_scaling(2.5, ln1).unwrap().zeta(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_functions_concave() {
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let laws = [
            dyadic_scaling(0.3).unwrap(),
            badic_scaling(2, MultiplierLaw::lognormal_with_mean(0.5, 0.3).unwrap()).unwrap(),
            badic_scaling(4, MultiplierLaw::TwoPoint { low: 0.1, high: 0.4 }).unwrap(),
            poisson_scaling(3.0, MultiplierLaw::binomial(1.5).unwrap()).unwrap(),
            poisson_scaling(2.0, MultiplierLaw::lognormal_with_mean(1.0, 0.5).unwrap()).unwrap(),
        ];
        for s in laws {
            assert!(s.is_midpoint_concave(&grid), "{s:?}");
        }
    }

    #[test]
    fn lognormal_quadratic_measure_scaling() {
        let s = 0.3;
        let law = MultiplierLaw::lognormal_with_mean(0.5, s).unwrap();
        let f = badic_scaling(2, law).unwrap();
        let mu = 0.5f64.ln() - 0.5 * s * s;
        for q in [0.5, 1.0, 2.5] {
            let expected = 1.0 + (q * mu + 0.5 * q * q * s * s) / 2f64.ln();
            assert!((f.measure(q) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_of_uniform_measure() {
        // T(q) = 1 - q: f(alpha) = inf_q (alpha q - 1 + q), equal to -1 at alpha = -1.
        let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
        let s = dyadic_scaling(0.5).unwrap();
        assert!((s.spectrum(-1.0, &grid) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_badic_is_uniform() {
        let m = badic_cascade(3, &MultiplierLaw::Constant(1.0 / 3.0), 5, 1.0, 2).unwrap();
        assert_eq!(m.len(), 243);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!(m.masses.iter().all(|v| (*v - 1.0 / 243.0).abs() < 1e-15));
    }

    #[test]
    fn unit_poisson_multipliers_give_lebesgue() {
        let m = poisson_multifractal(2.0, 3.0, &MultiplierLaw::Constant(1.0), 6, 2.0, 3).unwrap();
        let cum = m.cumulative();
        for (t, c) in m.boundaries.iter().zip(&cum) {
            assert!((c - t / 2.0).abs() < 1e-12);
        }
        assert_eq!(*m.boundaries.last().unwrap(), 2.0);
    }

    #[test]
    fn poisson_level_one_cut_count() {
        let (l1, horizon, reps) = (4.0, 2.5, 4000);
        let law = MultiplierLaw::Constant(1.0);
        let cuts: Vec<f64> = (0..reps)
            .map(|s| (poisson_multifractal(2.0, l1, &law, 1, horizon, s).unwrap().len() - 1) as f64)
            .collect();
        let mean = stats::mean(&cuts);
        let se = (l1 * horizon / reps as f64).sqrt();
        assert!((mean - l1 * horizon).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn sparse_poisson_level_is_single_interval() {
        let m = poisson_multifractal(2.0, 1e-9, &MultiplierLaw::Constant(1.0), 1, 1.0, 4).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.masses, vec![1.0]);
    }

    #[test]
    fn regrid_preserves_cumulative_mass() {
        let law = MultiplierLaw::binomial(1.5).unwrap();
        let m = poisson_multifractal(3.0, 1.0, &law, 5, 1.0, 5).unwrap();
        let r = m.regrid(1000).unwrap();
        assert_eq!(r.len(), 1000);
        assert!((r.total_mass() - m.total_mass()).abs() < 1e-12);
        assert!(r.masses.iter().all(|v| *v >= 0.0));
        let uniform = dyadic_bernoulli(0.5, 4, 1.0, 1).unwrap().regrid(32).unwrap();
        assert!(uniform.masses.iter().all(|v| (*v - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn composed_uniform_measure_is_brownian() {
        let m = dyadic_bernoulli(0.5, 14, 4.0, 6).unwrap();
        let path = mmar_compose(&m, 0.5, 7).unwrap();
        let inc = path.increments();
        let expected = 0.25 * 4.0 / 16384.0;
        let v = stats::variance(&inc);
        assert!((v / expected - 1.0).abs() < 4.0 * (2.0 / 16384f64).sqrt());
        assert_eq!(path.values[0], 0.0);
        assert_eq!(path.times.len(), path.values.len());
    }

    #[test]
    fn discretized_single_level_waiting_time() {
        let spec = Discretization {
            growth: 2.0,
            lambda_top: 0.05,
            levels: 1,
            law: MultiplierLaw::binomial(1.5).unwrap(),
            sigma: 1.0,
            cut_rule: CutRule::Nested,
        };
        let n = 200_000;
        let path = discretize_to_msm(&spec, n, 8).unwrap();
        let renewals = path.renewals[0] as f64;
        let trials = (n - 1) as f64;
        assert!((renewals - 0.05 * trials).abs() < 3.0 * (trials * 0.05 * 0.95).sqrt());
        assert!((trials / renewals - 20.0).abs() < 0.5);
    }

    #[test]
    fn nested_cuts_propagate_down() {
        let spec = Discretization {
            growth: 3.0,
            lambda_top: 0.5,
            levels: 4,
            law: MultiplierLaw::binomial(1.3).unwrap(),
            sigma: 1.0,
            cut_rule: CutRule::Nested,
        };
        let path = discretize_to_msm(&spec, 50_000, 9).unwrap();
        assert!(path.renewals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ladder_conversion_consistent() {
        let ladder = switching_ladder(0.931, 3.864, 9);
        let top = lambda_top_from_lowest(ladder[0], 3.864, 9);
        assert!((top - 0.931).abs() < 1e-12);
    }

    #[test]
    fn matches_msm_marginal_of_abs_x() {
        use crate::msm::{simulate, MsmParams};
        let params = MsmParams::new(3, 1.4, 3.0, 0.5, 1.0).unwrap();
        let spec = Discretization {
            growth: 3.0,
            lambda_top: 0.5,
            levels: 3,
            law: MultiplierLaw::binomial(1.4).unwrap(),
            sigma: 1.0,
            cut_rule: CutRule::Nested,
        };
        let a: Vec<f64> = discretize_to_msm(&spec, 20_000, 10).unwrap().x.iter().map(|v| v.abs()).collect();
        let b: Vec<f64> = simulate(&params, 20_000, 11).unwrap().x.iter().map(|v| v.abs()).collect();
        let (_, p) = stats::ks_two_sample(&a, &b);
        assert!(p > 0.001, "{p}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(dyadic_bernoulli(1.0, 3, 1.0, 0).is_err());
        assert!(dyadic_bernoulli(0.3, 0, 1.0, 0).is_err());
        assert!(badic_cascade(1, &MultiplierLaw::Constant(1.0), 3, 1.0, 0).is_err());
        assert!(poisson_multifractal(1.0, 1.0, &MultiplierLaw::Constant(1.0), 3, 1.0, 0).is_err());
        assert!(MultiplierLaw::TwoPoint { low: -0.1, high: 1.0 }.validate().is_err());
        assert!(mmar_compose(&dyadic_bernoulli(0.3, 2, 1.0, 0).unwrap(), 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn dyadic_conserves_mass(p in 0.01f64..0.99, depth in 1usize..14, seed in 0u64..1000) {
            let m = dyadic_bernoulli(p, depth, 1.0, seed).unwrap();
            prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!(m.masses.iter().all(|v| *v >= 0.0));
            prop_assert_eq!(m.len(), 1 << depth);
        }

        #[test]
        fn massless_cells_are_flat(sigma in 0.1f64..3.0, seed in 0u64..1000) {
            let mut m = dyadic_bernoulli(0.3, 6, 2.0, 1).unwrap();
            for v in m.masses.iter_mut().step_by(3) {
                *v = 0.0;
            }
            let path = mmar_compose(&m, sigma, seed).unwrap();
            for (i, w) in path.values.windows(2).enumerate() {
                prop_assert_eq!(w[1] == w[0], i % 3 == 0);
            }
        }
    }
}
