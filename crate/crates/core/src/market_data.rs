//! Daily rate series: loading, the zero-rate shift, increments and simple
//! descriptive diagnostics (conditional standard deviations, ACF).

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::stats;

/// Dated (or undated, for simulations) rate levels in percent per annum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    dates: Option<Vec<NaiveDate>>,
    values: Vec<f64>,
    shift: f64,
}

impl RateSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::invalid("dates and values differ in length"));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        let mut s = Self::from_values(values)?;
        s.dates = Some(dates);
        Ok(s)
    }

    /// An undated series, e.g. a simulated path.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a rate series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite rate at index {i}")));
        }
        Ok(Self {
            dates: None,
            values,
            shift: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    /// Cumulative offset already added to the raw values.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Adds `b >= 0` to every level. Fails if any shifted level is not
    /// strictly positive.
    pub fn apply_shift(&self, b: f64) -> Result<Self> {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("shift must be finite and >= 0, got {b}")));
        }
        let values: Vec<f64> = self.values.iter().map(|v| v + b).collect();
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::NonPositiveLevel { index, value });
        }
        Ok(Self {
            dates: self.dates.clone(),
            values,
            shift: self.shift + b,
        })
    }

    /// Errors on the first level that is not strictly positive.
    pub fn check_positive(&self) -> Result<()> {
        match self.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            Some((index, &value)) => Err(Error::NonPositiveLevel { index, value }),
            None => Ok(()),
        }
    }

    pub fn increments(&self) -> IncrementSeries {
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        IncrementSeries {
            values,
            lagged_levels: self.values[..self.values.len() - 1].to_vec(),
        }
    }

    /// First `len` observations.
    pub fn head(&self, len: usize) -> Result<Self> {
        let len = len.min(self.len());
        let values = self.values[..len].to_vec();
        let mut s = Self::from_values(values)?;
        s.dates = self.dates.as_ref().map(|d| d[..len].to_vec());
        s.shift = self.shift;
        Ok(s)
    }
}

/// `dr_t = r_t - r_{t-1}` alongside the lagged level `r_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    pub values: Vec<f64>,
    pub lagged_levels: Vec<f64>,
}

/// Which CSV column to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSpec {
    pub date_column: ColumnRef,
    pub rate_column: ColumnRef,
}

impl Default for CsvSpec {
    fn default() -> Self {
        Self {
            date_column: ColumnRef::Index(0),
            rate_column: ColumnRef::Index(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: RateSeries,
    /// Rows whose rate field was empty or a missing-value marker.
    pub dropped_missing: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

const MISSING_MARKERS: [&str; 7] = ["", ".", "na", "n/a", "nd", "nan", "null"];

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%m/%d/%Y"))
        .ok()
}

/// Reads a two-column (date, rate) series from a CSV file.
///
/// The header row is optional; it is detected when its date field does not
/// parse as a date. Rows with a missing rate are dropped and counted; any
/// other unparseable field is an error naming the 1-based file line. Rows
/// are sorted by date if they are out of order.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<LoadedSeries> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, spec)
}

pub fn parse_csv(text: &str, spec: &CsvSpec) -> Result<LoadedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut date_idx = None;
    let mut rate_idx = None;
    if let ColumnRef::Index(i) = spec.date_column {
        date_idx = Some(i);
    }
    if let ColumnRef::Index(i) = spec.rate_column {
        rate_idx = Some(i);
    }

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    let mut dropped = 0usize;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let lookup = |col: &ColumnRef| match col {
                ColumnRef::Name(name) => record.iter().position(|f| f == name),
                ColumnRef::Index(i) => Some(*i),
            };
            let names_wanted = matches!(spec.date_column, ColumnRef::Name(_))
                || matches!(spec.rate_column, ColumnRef::Name(_));
            let di = lookup(&spec.date_column);
            let looks_like_header = di
                .and_then(|i| record.get(i))
                .is_none_or(|f| parse_date(f).is_none());
            if names_wanted || looks_like_header {
                if !looks_like_header {
                    return Err(Error::Parse {
                        line,
                        message: "column names given but the file has no header row".into(),
                    });
                }
                date_idx = di;
                rate_idx = lookup(&spec.rate_column);
                if date_idx.is_none() || rate_idx.is_none() {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "header lacks requested columns {:?}/{:?}",
                            spec.date_column, spec.rate_column
                        ),
                    });
                }
                continue;
            }
        }
        let (di, ri) = (date_idx.unwrap_or(0), rate_idx.unwrap_or(1));
        let date_field = record.get(di).ok_or_else(|| Error::Parse {
            line,
            message: format!("missing date column {di}"),
        })?;
        let date = parse_date(date_field).ok_or_else(|| Error::Parse {
            line,
            message: format!("cannot parse date {date_field:?}"),
        })?;
        let rate_field = record.get(ri).unwrap_or("");
        if MISSING_MARKERS.contains(&rate_field.to_ascii_lowercase().as_str()) {
            dropped += 1;
            continue;
        }
        let rate: f64 = rate_field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse rate {rate_field:?}"),
        })?;
        if !rate.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite rate {rate_field:?}"),
            });
        }
        rows.push((date, rate));
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} valid rows, need at least 2",
            rows.len()
        )));
    }
    if rows.windows(2).any(|w| w[0].0 > w[1].0) {
        rows.sort_by_key(|r| r.0);
    }
    let (dates, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let first_date = dates[0];
    let last_date = dates[dates.len() - 1];
    Ok(LoadedSeries {
        series: RateSeries::new(dates, values)?,
        dropped_missing: dropped,
        first_date,
        last_date,
    })
}

/// `(dr_t - alpha0 - alpha1 * r_{t-1}) / r_{t-1}^gamma` for `t = 2..n`.
pub fn normalized_increments(
    series: &RateSeries,
    alpha0: f64,
    alpha1: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let v = series.values();
    let mut out = Vec::with_capacity(v.len() - 1);
    for t in 1..v.len() {
        let prev = v[t - 1];
        let scale = if gamma == 0.0 {
            1.0
        } else if prev > 0.0 {
            prev.powf(gamma)
        } else {
            return Err(Error::NonPositiveLevel {
                index: t - 1,
                value: prev,
            });
        };
        out.push((v[t] - prev - (alpha0 + alpha1 * prev)) / scale);
    }
    Ok(out)
}

/// Per-bin standard deviation of `dr_t` given the lagged level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSdvProfile {
    /// Mean lagged level in each bin.
    pub centers: Vec<f64>,
    pub sdvs: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Groups `(r_{t-1}, dr_t)` into equal-occupancy bins of `r_{t-1}` and
/// reports the sample standard deviation of `dr_t` in each. Bins with fewer
/// than `min_occupancy` pairs are merged into their smaller neighbour.
pub fn conditional_sdv(
    series: &RateSeries,
    n_bins: usize,
    min_occupancy: usize,
) -> Result<ConditionalSdvProfile> {
    if n_bins < 2 {
        return Err(Error::invalid("conditional_sdv needs at least 2 bins"));
    }
    let min_occupancy = min_occupancy.max(2);
    let inc = series.increments();
    let mut pairs: Vec<(f64, f64)> = inc
        .lagged_levels
        .iter()
        .copied()
        .zip(inc.values.iter().copied())
        .collect();
    let m = pairs.len();
    if m < 2 * min_occupancy {
        return Err(Error::InsufficientData(format!(
            "{m} increment pairs cannot fill 2 bins of {min_occupancy}"
        )));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Bin boundaries as half-open index ranges into `pairs`.
    let mut bounds: Vec<(usize, usize)> = (0..n_bins)
        .map(|j| (j * m / n_bins, (j + 1) * m / n_bins))
        .filter(|(a, b)| b > a)
        .collect();
    while bounds.len() > 1 {
        let Some(j) = bounds.iter().position(|(a, b)| b - a < min_occupancy) else {
            break;
        };
        let merge_left = if j == 0 {
            false
        } else if j + 1 == bounds.len() {
            true
        } else {
            let left = bounds[j - 1].1 - bounds[j - 1].0;
            let right = bounds[j + 1].1 - bounds[j + 1].0;
            left <= right
        };
        if merge_left {
            bounds[j - 1].1 = bounds[j].1;
            bounds.remove(j);
        } else {
            bounds[j + 1].0 = bounds[j].0;
            bounds.remove(j);
        }
    }

    let mut profile = ConditionalSdvProfile {
        centers: Vec::with_capacity(bounds.len()),
        sdvs: Vec::with_capacity(bounds.len()),
        counts: Vec::with_capacity(bounds.len()),
    };
    for (a, b) in bounds {
        let levels: Vec<f64> = pairs[a..b].iter().map(|p| p.0).collect();
        let incs: Vec<f64> = pairs[a..b].iter().map(|p| p.1).collect();
        profile.centers.push(stats::mean(&levels));
        profile.sdvs.push(stats::sample_variance(&incs).max(0.0).sqrt());
        profile.counts.push(b - a);
    }
    Ok(profile)
}

/// Least-squares fit of `s(r) = c * r^gamma - b` with `b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftFit {
    pub c: f64,
    pub gamma: f64,
    pub b: f64,
    pub sse: f64,
}

const SHIFT_GAMMA_MAX: f64 = 5.0;

/// For fixed `gamma` the model is linear in `(c, b)`; solve that with the
/// `b >= 0` constraint and return the residual sum of squares.
fn shift_profile_at(r: &[f64], s: &[f64], gamma: f64) -> (f64, f64, f64) {
    let u: Vec<f64> = r.iter().map(|v| v.powf(gamma)).collect();
    let n = r.len() as f64;
    let su: f64 = u.iter().sum();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let ss: f64 = s.iter().sum();
    let sus: f64 = u.iter().zip(s).map(|(a, b)| a * b).sum();
    let sse = |c: f64, b: f64| -> f64 {
        u.iter()
            .zip(s)
            .map(|(ui, si)| {
                let e = c * ui - b - si;
                e * e
            })
            .sum()
    };
    // Normal equations for s = c*u + k (k = -b).
    let det = n * suu - su * su;
    if det.abs() > 1e-12 * n * suu {
        let c = (n * sus - su * ss) / det;
        let k = (ss - c * su) / n;
        if -k >= 0.0 {
            return (c, -k, sse(c, -k));
        }
    }
    let c = if suu > 0.0 { sus / suu } else { 0.0 };
    (c, 0.0, sse(c, 0.0))
}

/// Fits the conditional-sdv power law used to choose the zero-rate shift.
pub fn fit_shift(profile: &ConditionalSdvProfile) -> Result<ShiftFit> {
    let r = &profile.centers;
    let s = &profile.sdvs;
    if r.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "shift fit needs at least 3 bins, got {}",
            r.len()
        )));
    }
    if r.iter().any(|v| *v <= 0.0) {
        return Err(Error::invalid(
            "shift fit needs positive bin centers (apply a provisional shift first)",
        ));
    }
    let sse_at = |g: f64| shift_profile_at(r, s, g).2;

    // Coarse scan, then golden-section refinement around the best node.
    const GRID: usize = 1000;
    let step = SHIFT_GAMMA_MAX / GRID as f64;
    let (best_i, _) = (0..=GRID)
        .map(|i| (i, sse_at(i as f64 * step)))
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Optimizer("shift fit objective is non-finite everywhere".into()))?;
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = (best_i as f64 + 1.0).min(GRID as f64) * step;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = sse_at(x1);
    let mut f2 = sse_at(x2);
    let mut iterations = 0;
    while hi - lo > 1e-13 {
        iterations += 1;
        if iterations > 500 {
            return Err(Error::Optimizer("shift fit did not converge".into()));
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = sse_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = sse_at(x2);
        }
    }
    let mut gamma = 0.5 * (lo + hi);
    // The bracket may have collapsed onto gamma = 0 from above.
    if sse_at(0.0) <= sse_at(gamma) {
        gamma = 0.0;
    }
    let (c, b, sse) = shift_profile_at(r, s, gamma);
    Ok(ShiftFit { c, gamma, b, sse })
}

/// Sample autocorrelations at lags `1..=max_lag` with the iid 95% band.
#[derive(Debug, Clone, PartialEq)]
pub struct Acf {
    pub values: Vec<f64>,
    /// `1.96 / sqrt(n)`.
    pub band: f64,
}

/// Biased (divide-by-n) sample autocorrelation function.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Result<Acf> {
    let n = x.len();
    if max_lag == 0 || max_lag + 1 >= n {
        return Err(Error::InsufficientData(format!(
            "max_lag {max_lag} needs a series longer than {}, got {n}",
            max_lag + 1
        )));
    }
    let m = stats::mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    let values = (1..=max_lag)
        .map(|k| {
            if c0 == 0.0 {
                0.0
            } else {
                dev[k..].iter().zip(&dev[..n - k]).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect();
    Ok(Acf {
        values,
        band: 1.96 / (n as f64).sqrt(),
    })
}
