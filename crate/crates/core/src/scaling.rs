//! Empirical structure functions, scaling-exponent regressions and the
//! volatility-persistence diagnostic.

use crate::cascades::ScalingFunction;
use crate::error::{Error, Result};
use crate::stats::{self, LinearFit};

/// `S_q(lag)`: mean of `|X(t + lag) - X(t)|^q` over overlapping increments.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunctionTable {
    pub lags: Vec<usize>,
    pub qs: Vec<f64>,
    /// `values[i][j]` is `S_{qs[i]}(lags[j])`.
    pub values: Vec<Vec<f64>>,
    /// Increments averaged per lag.
    pub counts: Vec<usize>,
}

impl StructureFunctionTable {
    /// Entry-wise mean of tables built on the same grids, e.g. over
    /// independent realizations.
    pub fn average(tables: &[StructureFunctionTable]) -> Result<StructureFunctionTable> {
        let first = tables
            .first()
            .ok_or_else(|| Error::InsufficientData("no tables to average".into()))?;
        if tables.iter().any(|t| t.lags != first.lags || t.qs != first.qs) {
            return Err(Error::invalid("tables use different lag or moment grids"));
        }
        let k = tables.len() as f64;
        let values = (0..first.qs.len())
            .map(|i| {
                (0..first.lags.len())
                    .map(|j| tables.iter().map(|t| t.values[i][j]).sum::<f64>() / k)
                    .collect()
            })
            .collect();
        let counts = (0..first.lags.len())
            .map(|j| tables.iter().map(|t| t.counts[j]).sum())
            .collect();
        Ok(StructureFunctionTable {
            lags: first.lags.clone(),
            qs: first.qs.clone(),
            values,
            counts,
        })
    }

    /// Soft check that `S_2` does not decrease with the lag.
    pub fn second_moment_nondecreasing(&self) -> Option<bool> {
        let i = self.qs.iter().position(|q| *q == 2.0)?;
        Some(self.values[i].windows(2).all(|w| w[1] >= w[0]))
    }
}

/// Up to `count` distinct integer lags, log-spaced between `min` and `max`.
pub fn log_spaced_lags(min: usize, max: usize, count: usize) -> Vec<usize> {
    if min == 0 || max < min || count == 0 {
        return Vec::new();
    }
    if count > max - min {
        return (min..=max).collect();
    }
    if count == 1 {
        return vec![min];
    }
    let (a, b) = ((min as f64).ln(), (max as f64).ln());
    let mut lags: Vec<usize> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    lags.dedup();
    lags
}

pub fn structure_functions(path: &[f64], lags: &[usize], qs: &[f64]) -> Result<StructureFunctionTable> {
    if lags.is_empty() || qs.is_empty() {
        return Err(Error::invalid("need at least one lag and one moment"));
    }
    if lags.contains(&0) {
        return Err(Error::invalid("lags must be positive"));
    }
    let max_lag = *lags.iter().max().unwrap_or(&0);
    if max_lag * 10 >= path.len() {
        return Err(Error::invalid(format!(
            "largest lag {max_lag} must stay below a tenth of the path length {}",
            path.len()
        )));
    }
    if qs.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
        return Err(Error::invalid("moments must be positive"));
    }
    let mut values = vec![vec![0.0; lags.len()]; qs.len()];
    let mut counts = Vec::with_capacity(lags.len());
    for (j, &lag) in lags.iter().enumerate() {
        let m = path.len() - lag;
        counts.push(m);
        let mut sums = vec![0.0; qs.len()];
        for t in 0..m {
            let a = (path[t + lag] - path[t]).abs();
            for (s, q) in sums.iter_mut().zip(qs) {
                *s += if *q == 2.0 { a * a } else { a.powf(*q) };
            }
        }
        for (i, s) in sums.into_iter().enumerate() {
            values[i][j] = s / m as f64;
        }
    }
    Ok(StructureFunctionTable {
        lags: lags.to_vec(),
        qs: qs.to_vec(),
        values,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaEstimate {
    pub q: f64,
    pub zeta: f64,
    pub std_error: f64,
    pub intercept: f64,
    pub lags_used: usize,
}

/// Inclusive lag range used in a regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleRange {
    pub min_lag: usize,
    pub max_lag: usize,
}

impl ScaleRange {
    pub fn new(min_lag: usize, max_lag: usize) -> Self {
        Self { min_lag, max_lag }
    }

    /// One decade starting at lag 1.
    pub fn first_decade() -> Self {
        Self::new(1, 10)
    }

    pub fn contains(&self, lag: usize) -> bool {
        lag >= self.min_lag && lag <= self.max_lag
    }

    /// Warning text when the range reaches past `horizon` (e.g. `b^K` for
    /// an MSM of order `K`).
    pub fn horizon_warning(&self, horizon: f64) -> Option<String> {
        (self.max_lag as f64 > horizon).then(|| {
            format!(
                "fit range reaches lag {} beyond the scaling horizon {horizon:.0}",
                self.max_lag
            )
        })
    }
}

fn slope_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    stats::ols(x, y).ok_or_else(|| Error::Numerical("degenerate regression".into()))
}

/// Per-moment OLS slope of `log S_q` on `log lag` over `range`.
pub fn zeta_fit(table: &StructureFunctionTable, range: ScaleRange) -> Result<Vec<ZetaEstimate>> {
    let cols: Vec<usize> = (0..table.lags.len())
        .filter(|&j| range.contains(table.lags[j]))
        .collect();
    if cols.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} lags in [{}, {}], need at least 4",
            cols.len(),
            range.min_lag,
            range.max_lag
        )));
    }
    let x: Vec<f64> = cols.iter().map(|&j| (table.lags[j] as f64).ln()).collect();
    table
        .qs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let y = cols
                .iter()
                .map(|&j| {
                    let v = table.values[i][j];
                    if v > 0.0 {
                        Ok(v.ln())
                    } else {
                        Err(Error::Numerical(format!(
                            "S_{q}({}) = {v} is not positive",
                            table.lags[j]
                        )))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let fit = slope_fit(&x, &y)?;
            Ok(ZetaEstimate {
                q,
                zeta: fit.slope,
                std_error: fit.slope_se,
                intercept: fit.intercept,
                lags_used: cols.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceFit {
    pub q: f64,
    /// Slope of log autocovariance on log lag (negative for decay).
    pub slope: f64,
    pub std_error: f64,
    pub lags_used: Vec<usize>,
    /// Lags dropped because the sample autocovariance was not positive.
    pub lags_dropped: Vec<usize>,
    /// False when most autocorrelations sit inside the iid band or too few
    /// lags remain.
    pub reliable: bool,
}

/// Decay of `Cov(|x_0|^q, |x_t|^q)` over the lags in `range` (log-spaced,
/// at most `points` of them).
pub fn persistence_exponent(x: &[f64], q: f64, range: ScaleRange, points: usize) -> Result<PersistenceFit> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::invalid(format!("moment q must be positive, got {q}")));
    }
    if range.min_lag == 0 || range.max_lag < range.min_lag {
        return Err(Error::invalid("lag range must satisfy 1 <= min <= max"));
    }
    if range.max_lag * 10 >= x.len() {
        return Err(Error::InsufficientData(format!(
            "{} observations are too few for lag {}",
            x.len(),
            range.max_lag
        )));
    }
    let y: Vec<f64> = x.iter().map(|v| v.abs().powf(q)).collect();
    let n = y.len();
    let mean = stats::mean(&y);
    let var = stats::variance(&y);
    if !(var > 0.0) {
        return Err(Error::Numerical("|x|^q has zero variance".into()));
    }
    let band = 1.96 / (n as f64).sqrt();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut significant = 0;
    let lags = log_spaced_lags(range.min_lag, range.max_lag, points.max(4));
    for &lag in &lags {
        let cov = y[lag..]
            .iter()
            .zip(&y[..n - lag])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        if cov / var > band {
            significant += 1;
        }
        if cov > 0.0 {
            used.push(lag);
            lx.push((lag as f64).ln());
            ly.push(cov.ln());
        } else {
            dropped.push(lag);
        }
    }
    if used.len() < 3 {
        return Ok(PersistenceFit {
            q,
            slope: f64::NAN,
            std_error: f64::NAN,
            lags_used: used,
            lags_dropped: dropped,
            reliable: false,
        });
    }
    let fit = slope_fit(&lx, &ly)?;
    Ok(PersistenceFit {
        q,
        slope: fit.slope,
        std_error: fit.slope_se,
        reliable: used.len() >= 4 && 2 * significant > lags.len(),
        lags_used: used,
        lags_dropped: dropped,
    })
}

/// Slope of the log autocovariance of `|x|^q` implied by a scaling
/// function: `zeta(2q) - 2 zeta(q)`, negative for a concave `zeta`.
pub fn predicted_persistence_slope(scaling: &ScalingFunction, q: f64) -> f64 {
    scaling.zeta(2.0 * q) - 2.0 * scaling.zeta(q)
}
