//! Vuong closeness tests between two fitted models, plain and with a
//! Newey–West (HAC) long-run variance.
//!
//! The statistic tests equality of BIC: the log-likelihood-ratio sum is
//! penalized by `(k_alt - k_ref) * ln(m) / 2`. A negative statistic favors
//! the reference model and the one-sided p-value is `Phi(statistic)`.

use crate::error::{Error, Result};
use crate::loglik::LogDensities;
use crate::stats::normal_cdf;

/// Fewest aligned observations accepted.
pub const MIN_ALIGNED: usize = 30;

/// Per-observation log-densities of a fitted model with its parameter count.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub densities: &'a LogDensities,
    pub dim: usize,
}

impl<'a> Candidate<'a> {
    pub fn new(densities: &'a LogDensities, dim: usize) -> Self {
        Self { densities, dim }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VuongReport {
    pub statistic: f64,
    pub p_value: f64,
    pub statistic_hac: f64,
    pub p_value_hac: f64,
    /// Number of aligned observations.
    pub m: usize,
    /// Series index of the first aligned observation.
    pub first_index: usize,
    pub hac_lag: usize,
    /// `(k_alt - k_ref) * ln(m) / 2`, subtracted from the log-ratio sum.
    pub penalty: f64,
    /// Differences had zero variance; statistics set to 0.
    pub degenerate: bool,
}

/// Common index range of two density vectors.
pub fn align<'a>(a: &'a LogDensities, b: &'a LogDensities) -> Result<(usize, &'a [f64], &'a [f64])> {
    let start = a.first_index.max(b.first_index);
    let end = a.end_index().min(b.end_index());
    if end <= start {
        return Err(Error::InsufficientData(
            "log-density vectors share no observations".into(),
        ));
    }
    let wa = a.window(start, end).expect("range inside a");
    let wb = b.window(start, end).expect("range inside b");
    Ok((start, wa, wb))
}

/// `floor(4 * (m / 100)^(2/9))`.
pub fn default_lag(m: usize) -> usize {
    (4.0 * (m as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Autocovariance at `lag` around the sample mean, divisor `m`.
fn autocovariance(d: &[f64], mean: f64, lag: usize) -> f64 {
    let m = d.len();
    if lag >= m {
        return 0.0;
    }
    d[lag..]
        .iter()
        .zip(&d[..m - lag])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / m as f64
}

/// Bartlett-weighted long-run variance `g0 + 2 sum_j (1 - j/(L+1)) g_j`.
pub fn newey_west_variance(d: &[f64], lag: usize) -> f64 {
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let mut v = autocovariance(d, mean, 0);
    for j in 1..=lag {
        let w = 1.0 - j as f64 / (lag as f64 + 1.0);
        v += 2.0 * w * autocovariance(d, mean, j);
    }
    v
}

/// Plain and HAC statistics with the default lag.
pub fn vuong(reference: Candidate<'_>, alternative: Candidate<'_>) -> Result<VuongReport> {
    vuong_hac(reference, alternative, None)
}

/// Plain and HAC statistics; `lag = None` uses [`default_lag`].
pub fn vuong_hac(
    reference: Candidate<'_>,
    alternative: Candidate<'_>,
    lag: Option<usize>,
) -> Result<VuongReport> {
    let (first_index, r, a) = align(reference.densities, alternative.densities)?;
    let m = r.len();
    if m < MIN_ALIGNED {
        return Err(Error::InsufficientData(format!(
            "{m} aligned observations, need at least {MIN_ALIGNED}"
        )));
    }
    let d: Vec<f64> = a.iter().zip(r).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite log-density difference".into()));
    }
    let mf = m as f64;
    let penalty = (alternative.dim as f64 - reference.dim as f64) * mf.ln() / 2.0;
    let total = d.iter().sum::<f64>() - penalty;
    let lag = lag.unwrap_or_else(|| default_lag(m));

    let plain_var = newey_west_variance(&d, 0);
    let hac_var = newey_west_variance(&d, lag);
    // Relative to the scale of d: exact ties leave rounding-level variance.
    let scale = d.iter().map(|v| v * v).sum::<f64>() / mf;
    let negligible = |v: f64| v <= 1e-24 * scale.max(f64::MIN_POSITIVE) || v <= 0.0;
    if negligible(plain_var) {
        return Ok(VuongReport {
            statistic: 0.0,
            p_value: 0.5,
            statistic_hac: 0.0,
            p_value_hac: 0.5,
            m,
            first_index,
            hac_lag: lag,
            penalty,
            degenerate: true,
        });
    }
    if hac_var <= 0.0 {
        return Err(Error::Numerical(format!(
            "long-run variance estimate {hac_var:e} is not positive at lag {lag}; try a larger lag"
        )));
    }
    let statistic = total / (plain_var.sqrt() * mf.sqrt());
    let statistic_hac = total / (hac_var.sqrt() * mf.sqrt());
    Ok(VuongReport {
        statistic,
        p_value: normal_cdf(statistic),
        statistic_hac,
        p_value_hac: normal_cdf(statistic_hac),
        m,
        first_index,
        hac_lag: lag,
        penalty,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::seeded_rng(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn identical_models_are_degenerate() {
        let v = LogDensities::new(1, noise(100, 1));
        let r = vuong(Candidate::new(&v, 3), Candidate::new(&v, 3)).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.statistic, r.p_value), (0.0, 0.5));
        assert_eq!(r.penalty, 0.0);
    }

    #[test]
    fn zero_lag_matches_plain() {
        let a = LogDensities::new(1, noise(500, 2));
        let b = LogDensities::new(1, noise(500, 3));
        let r = vuong_hac(Candidate::new(&a, 2), Candidate::new(&b, 4), Some(0)).unwrap();
        assert!((r.statistic - r.statistic_hac).abs() < 1e-12);
        assert_eq!(r.hac_lag, 0);
    }

    #[test]
    fn hand_computed_statistic() {
        let reference: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let alt: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() + 0.1 * (i % 3) as f64 - 0.2).collect();
        let a = LogDensities::new(1, reference.clone());
        let b = LogDensities::new(1, alt.clone());
        let r = vuong_hac(Candidate::new(&a, 3), Candidate::new(&b, 5), Some(0)).unwrap();
        let d: Vec<f64> = alt.iter().zip(&reference).map(|(x, y)| x - y).collect();
        let m = 40.0f64;
        let mean = d.iter().sum::<f64>() / m;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        let expected = (d.iter().sum::<f64>() - 2.0 * m.ln() / 2.0) / (var.sqrt() * m.sqrt());
        assert!((r.statistic - expected).abs() < 1e-12);
        assert!((r.p_value - normal_cdf(expected)).abs() < 1e-15);
        assert!(r.statistic < 0.0);
    }

    #[test]
    fn alignment_uses_intersection() {
        let a = LogDensities::new(1, (0..50).map(|i| i as f64).collect());
        let b = LogDensities::new(2, (0..49).map(|i| i as f64 * 2.0).collect());
        let (start, wa, wb) = align(&a, &b).unwrap();
        assert_eq!(start, 2);
        assert_eq!(wa.len(), 49);
        assert_eq!(wa[0], 1.0);
        assert_eq!(wb[0], 0.0);
        let r = vuong(Candidate::new(&a, 1), Candidate::new(&b, 1)).unwrap();
        assert_eq!((r.m, r.first_index), (49, 2));
    }

    #[test]
    fn too_short_rejected() {
        let a = LogDensities::new(1, vec![0.0; 10]);
        assert!(matches!(
            vuong(Candidate::new(&a, 1), Candidate::new(&a, 1)),
            Err(Error::InsufficientData(_))
        ));
        let b = LogDensities::new(100, vec![0.0; 10]);
        assert!(align(&a, &b).is_err());
    }

    #[test]
    fn default_lag_values() {
        assert_eq!(default_lag(100), 4);
        assert_eq!(default_lag(14171), 12);
        assert_eq!(default_lag(30), 3);
    }

    #[test]
    fn hac_shrinks_under_positive_autocorrelation() {
        let m = 20_000;
        let e = noise(m, 9);
        let mut d = Vec::with_capacity(m);
        let mut prev = 0.0;
        for v in e {
            prev = 0.5 * prev + v;
            d.push(prev + 0.02);
        }
        let zero = LogDensities::new(1, vec![0.0; m]);
        let alt = LogDensities::new(1, d);
        let r = vuong_hac(Candidate::new(&zero, 1), Candidate::new(&alt, 1), Some(40)).unwrap();
        let ratio = r.statistic_hac / r.statistic;
        let expected = (0.5f64 / 1.5).sqrt();
        assert!((ratio / expected - 1.0).abs() < 0.25, "{ratio}");
    }

    proptest! {
        #[test]
        fn antisymmetric(seed in 0u64..1000, k1 in 1usize..8, k2 in 1usize..8) {
            let a = LogDensities::new(1, noise(60, seed));
            let b = LogDensities::new(1, noise(60, seed + 5000));
            let ab = vuong(Candidate::new(&a, k1), Candidate::new(&b, k2)).unwrap();
            let ba = vuong(Candidate::new(&b, k2), Candidate::new(&a, k1)).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
            prop_assert_eq!(ab.statistic_hac, -ba.statistic_hac);
            prop_assert!((ab.p_value - (1.0 - ba.p_value)).abs() < 1e-12);
        }

        #[test]
        fn common_shift_invariant(seed in 0u64..1000, c in -100.0f64..100.0) {
            let a = noise(60, seed);
            let b = noise(60, seed + 7000);
            let r1 = vuong(
                Candidate::new(&LogDensities::new(1, a.clone()), 2),
                Candidate::new(&LogDensities::new(1, b.clone()), 3),
            ).unwrap();
            let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
            let r2 = vuong(
                Candidate::new(&LogDensities::new(1, shift(&a)), 2),
                Candidate::new(&LogDensities::new(1, shift(&b)), 3),
            ).unwrap();
            prop_assert!((r1.statistic - r2.statistic).abs() < 1e-9);
            prop_assert!((r1.statistic_hac - r2.statistic_hac).abs() < 1e-9);
        }
    }
}
