//! Maximum-likelihood machinery shared by every model family.
//!
//! Parameters are optimized in an unconstrained search space obtained from
//! per-parameter [`Bound`]s, with a Nelder–Mead simplex started from
//! user-supplied warm starts and Latin-hypercube draws. Standard errors come
//! from the inverse observed information (central-difference Hessian on the
//! natural scale), falling back per parameter to the outer product of
//! per-observation scores.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Domain of one parameter and its map to the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// Unrestricted; the search coordinate is `theta / scale`, so `scale`
    /// should be a plausible size for a first move.
    Free { scale: f64 },
    /// `theta > lo`, searched as `log(theta - lo)`.
    Lower(f64),
    /// `lo < theta < hi`, searched as `logit((theta - lo) / (hi - lo))`.
    Interval(f64, f64),
}

impl Bound {
    pub fn contains(&self, theta: f64) -> bool {
        match *self {
            Bound::Free { .. } => theta.is_finite(),
            Bound::Lower(lo) => theta > lo && theta.is_finite(),
            Bound::Interval(lo, hi) => theta > lo && theta < hi,
        }
    }

    pub fn to_search(&self, theta: f64) -> Option<f64> {
        if !self.contains(theta) {
            return None;
        }
        Some(match *self {
            Bound::Free { scale } => theta / scale,
            Bound::Lower(lo) => (theta - lo).ln(),
            Bound::Interval(lo, hi) => {
                let p = (theta - lo) / (hi - lo);
                (p / (1.0 - p)).ln()
            }
        })
    }

    pub fn to_natural(&self, u: f64) -> f64 {
        match *self {
            Bound::Free { scale } => u * scale,
            Bound::Lower(lo) => lo + u.exp(),
            Bound::Interval(lo, hi) => {
                let p = if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                };
                lo + (hi - lo) * p
            }
        }
    }

    /// Moves `theta` strictly inside the domain if it sits on or beyond an
    /// edge.
    fn clamp_inside(&self, theta: f64) -> f64 {
        match *self {
            Bound::Free { .. } => theta,
            Bound::Lower(lo) => {
                if theta > lo {
                    theta
                } else {
                    lo + 1e-6 * lo.abs().max(1.0)
                }
            }
            Bound::Interval(lo, hi) => {
                let eps = 1e-6 * (hi - lo);
                theta.clamp(lo + eps, hi - eps)
            }
        }
    }

    /// Largest step that keeps `theta +- h` inside the domain.
    fn room(&self, theta: f64) -> f64 {
        match *self {
            Bound::Free { .. } => f64::INFINITY,
            Bound::Lower(lo) => theta - lo,
            Bound::Interval(lo, hi) => (theta - lo).min(hi - theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTransform {
    bounds: Vec<Bound>,
}

impl ParamTransform {
    pub fn new(bounds: Vec<Bound>) -> Self {
        Self { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && self.bounds.iter().zip(theta).all(|(b, t)| b.contains(*t))
    }

    pub fn to_search(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.dim(),
                theta.len()
            )));
        }
        self.bounds
            .iter()
            .zip(theta)
            .enumerate()
            .map(|(i, (b, &t))| {
                b.to_search(t).ok_or_else(|| {
                    Error::invalid(format!("parameter {i} = {t} outside its domain {b:?}"))
                })
            })
            .collect()
    }

    pub fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(u).map(|(b, &v)| b.to_natural(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    pub max_iter: usize,
    /// Converged when the spread of simplex values is below
    /// `f_tol * max(1, |f_best|)`...
    pub f_tol: f64,
    /// ...and every vertex lies within `x_tol` of the best one.
    pub x_tol: f64,
    /// Also converged when the best value improved by less than
    /// `10 * f_tol * max(1, |f_best|)` over the last `stall_window * (n + 1)`
    /// iterations (flat directions never shrink the simplex).
    pub stall_window: usize,
    /// Initial edge length in the search space.
    pub step: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            f_tol: 1e-11,
            x_tol: 1e-7,
            stall_window: 50,
            step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` with an adaptive Nelder–Mead simplex (dimension-dependent
/// expansion, contraction and shrink coefficients). Non-finite values are
/// treated as `+inf`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    settings: &SimplexSettings,
) -> SimplexOutcome {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0);
        return SimplexOutcome {
            x: Vec::new(),
            fx,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += settings.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let window = settings.stall_window.saturating_mul(n + 1);
    let mut history: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    let mut centroid = vec![0.0; n];
    let point = |c: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(worst).map(|(ci, wi)| ci + t * (ci - wi)).collect()
    };
    while iterations < settings.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if best.is_finite() {
            let spread = worst - best;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let tol = settings.f_tol * best.abs().max(1.0);
            if spread <= tol && diameter <= settings.x_tol {
                converged = true;
                break;
            }
            if window > 0 {
                history.push_back(best);
                if history.len() > window {
                    let old = history.pop_front().unwrap_or(best);
                    if old - best <= 10.0 * tol {
                        converged = true;
                        break;
                    }
                }
            }
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let xr = point(&centroid, &simplex[n], alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = point(&centroid, &simplex[n], alpha * beta);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = point(&centroid, &simplex[n], alpha * gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &simplex[n], -gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let x_best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&x_best) {
                *x = b + delta * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    SimplexOutcome {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        evaluations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeSettings {
    /// Number of Latin-hypercube starts drawn from `start_box`.
    pub starts: usize,
    /// Natural-scale starting points tried before the random ones.
    pub warm_starts: Vec<Vec<f64>>,
    /// Natural-scale `(lo, hi)` range per parameter for random starts.
    pub start_box: Vec<(f64, f64)>,
    pub seed: u64,
    pub simplex: SimplexSettings,
    /// Fresh simplices built around the incumbent after a run stops.
    pub restarts: usize,
}

impl Default for MaximizeSettings {
    fn default() -> Self {
        Self {
            starts: 4,
            warm_starts: Vec::new(),
            start_box: Vec::new(),
            seed: 0,
            simplex: SimplexSettings::default(),
            restarts: 2,
        }
    }
}

/// Result of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub iterations: usize,
    pub runs: Vec<StartSummary>,
}

/// Latin-hypercube sample of `count` points in the box.
pub fn latin_hypercube(bounds: &[(f64, f64)], count: usize, rng: &mut crate::SimRng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; bounds.len()]; count];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        for (point, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            point[j] = lo + (hi - lo) * (s as f64 + u) / count as f64;
        }
    }
    points
}

/// Maximizes a natural-scale log-likelihood. Non-finite objective values
/// mark infeasible points. Deterministic for a fixed seed.
pub fn maximize(
    objective: impl Fn(&[f64]) -> f64,
    transform: &ParamTransform,
    settings: &MaximizeSettings,
) -> Result<Optimum> {
    let dim = transform.dim();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for w in &settings.warm_starts {
        if w.len() != dim {
            return Err(Error::invalid(format!(
                "warm start has {} values, model has {dim}",
                w.len()
            )));
        }
        starts.push(w.clone());
    }
    if settings.starts > 0 {
        if settings.start_box.len() != dim {
            return Err(Error::invalid("start box does not match the parameter count"));
        }
        let mut rng = crate::seeded_rng(settings.seed);
        starts.extend(latin_hypercube(&settings.start_box, settings.starts, &mut rng));
    }
    if starts.is_empty() {
        return Err(Error::invalid("no starting points"));
    }

    let search_objective = |u: &[f64]| {
        let v = objective(&transform.to_natural(u));
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let mut evaluations = 0;
    let mut iterations = 0;
    let mut runs = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for start in starts {
        let clamped: Vec<f64> = transform
            .bounds()
            .iter()
            .zip(&start)
            .map(|(b, &t)| b.clamp_inside(t))
            .collect();
        let u0 = transform.to_search(&clamped)?;
        evaluations += 1;
        if !search_objective(&u0).is_finite() {
            runs.push(StartSummary {
                start,
                log_likelihood: f64::NEG_INFINITY,
                converged: false,
            });
            continue;
        }
        let mut out = nelder_mead(search_objective, &u0, &settings.simplex);
        evaluations += out.evaluations;
        iterations += out.iterations;
        for _ in 0..settings.restarts {
            let again = nelder_mead(search_objective, &out.x, &settings.simplex);
            evaluations += again.evaluations;
            iterations += again.iterations;
            let gain = out.fx - again.fx;
            let settled = gain <= settings.simplex.f_tol * out.fx.abs().max(1.0) * 10.0;
            if again.fx <= out.fx {
                out = SimplexOutcome {
                    converged: again.converged,
                    ..again
                };
            }
            if settled {
                break;
            }
        }
        runs.push(StartSummary {
            start,
            log_likelihood: -out.fx,
            converged: out.converged,
        });
        if best.as_ref().is_none_or(|b| out.fx < b.1) {
            best = Some((out.x, out.fx, out.converged));
        }
    }
    let (u, _, converged) = best
        .filter(|b| b.1.is_finite())
        .ok_or_else(|| Error::Optimizer("objective not finite at any start".into()))?;
    let theta = transform.to_natural(&u);
    let log_likelihood = objective(&theta);
    Ok(Optimum {
        theta,
        log_likelihood,
        converged,
        evaluations: evaluations + 1,
        iterations,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMethod {
    ObservedInformation,
    OuterProduct,
    Unavailable,
}

impl SeMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeMethod::ObservedInformation => "observed-information",
            SeMethod::OuterProduct => "outer-product",
            SeMethod::Unavailable => "unavailable",
        }
    }
}

impl FromStr for SeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed-information" => Ok(SeMethod::ObservedInformation),
            "outer-product" => Ok(SeMethod::OuterProduct),
            "unavailable" => Ok(SeMethod::Unavailable),
            other => Err(Error::invalid(format!("unknown standard-error method {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub values: Vec<f64>,
    pub methods: Vec<SeMethod>,
}

/// Relative finite-difference step, roughly the fourth root of machine
/// epsilon (optimal for central second differences).
const HESSIAN_STEP: f64 = 1.2e-4;

fn nominal_step(t: f64, bound: &Bound) -> f64 {
    let floor = match bound {
        Bound::Free { scale } => scale.abs(),
        _ => 1e-2,
    };
    HESSIAN_STEP * t.abs().max(floor)
}

fn fd_steps(theta: &[f64], transform: &ParamTransform) -> Vec<f64> {
    theta
        .iter()
        .zip(transform.bounds())
        .map(|(&t, b)| nominal_step(t, b).min(0.5 * b.room(t)))
        .collect()
}

/// Parameters whose estimate sits so close to a bound that the difference
/// step collapses; their curvature is meaningless and they are held fixed.
pub fn pinned_at_bound(theta: &[f64], transform: &ParamTransform) -> Vec<bool> {
    theta
        .iter()
        .zip(transform.bounds())
        .map(|(&t, b)| 0.5 * b.room(t) < 1e-3 * nominal_step(t, b))
        .collect()
}

/// Standard errors from the per-observation log-density function at `theta`.
///
/// Parameters pinned at a bound are held fixed and get
/// [`SeMethod::Unavailable`].
pub fn standard_errors(
    per_obs: impl Fn(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    transform: &ParamTransform,
) -> Result<StandardErrors> {
    let p = theta.len();
    if !transform.contains(theta) {
        return Err(Error::invalid("standard errors need an interior point"));
    }
    let h = fd_steps(theta, transform);
    let pinned = pinned_at_bound(theta, transform);
    let active: Vec<usize> = (0..p).filter(|&i| !pinned[i]).collect();
    let pa = active.len();
    let mut values = vec![f64::NAN; p];
    let mut methods = vec![SeMethod::Unavailable; p];
    if pa == 0 {
        return Ok(StandardErrors { values, methods });
    }
    let total = |t: &[f64]| -> Result<f64> {
        let v: f64 = per_obs(t)?.iter().sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical("non-finite log-likelihood in Hessian".into()))
        }
    };
    let shifted = |moves: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, s) in moves {
            t[i] += s;
        }
        t
    };
    let f0 = total(theta)?;
    let mut hess = DMatrix::<f64>::zeros(pa, pa);
    for (a, &i) in active.iter().enumerate() {
        let fp = total(&shifted(&[(i, h[i])]))?;
        let fm = total(&shifted(&[(i, -h[i])]))?;
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (c, &j) in active[..a].iter().enumerate() {
            let fpp = total(&shifted(&[(i, h[i]), (j, h[j])]))?;
            let fpm = total(&shifted(&[(i, h[i]), (j, -h[j])]))?;
            let fmp = total(&shifted(&[(i, -h[i]), (j, h[j])]))?;
            let fmm = total(&shifted(&[(i, -h[i]), (j, -h[j])]))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(a, c)] = v;
            hess[(c, a)] = v;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Hessian entry".into()));
    }
    let info = -hess;
    let inverse = match info.clone().cholesky() {
        Some(c) => Some(c.inverse()),
        None => info.try_inverse(),
    };
    if let Some(inv) = &inverse {
        for (a, &i) in active.iter().enumerate() {
            let v = inv[(a, a)];
            if v > 0.0 && v.is_finite() {
                values[i] = v.sqrt();
                methods[i] = SeMethod::ObservedInformation;
            }
        }
    }
    if active.iter().any(|&i| methods[i] == SeMethod::Unavailable) {
        let opg = outer_product_of_scores(&per_obs, theta, &h, &active)?;
        if let Some(inv) = opg.try_inverse() {
            for (a, &i) in active.iter().enumerate() {
                let v = inv[(a, a)];
                if methods[i] == SeMethod::Unavailable && v > 0.0 && v.is_finite() {
                    values[i] = v.sqrt();
                    methods[i] = SeMethod::OuterProduct;
                }
            }
        }
    }
    Ok(StandardErrors { values, methods })
}

fn outer_product_of_scores(
    per_obs: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    h: &[f64],
    active: &[usize],
) -> Result<DMatrix<f64>> {
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for &i in active {
        let mut up = theta.to_vec();
        up[i] += h[i];
        let mut down = theta.to_vec();
        down[i] -= h[i];
        let a = per_obs(&up)?;
        let b = per_obs(&down)?;
        scores.push(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h[i])).collect());
    }
    let p = active.len();
    let mut opg = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v: f64 = scores[i].iter().zip(&scores[j]).map(|(a, b)| a * b).sum();
            opg[(i, j)] = v;
            opg[(j, i)] = v;
        }
    }
    Ok(opg)
}

/// Per-observation BIC, `(-2 logL + k ln n) / n`.
pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    let n = n as f64;
    (-2.0 * log_likelihood + k as f64 * n.ln()) / n
}

/// Estimation result for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: String,
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub se_methods: Vec<SeMethod>,
    pub log_likelihood: f64,
    pub bic: f64,
    /// Number of log-density addends.
    pub n_obs: usize,
    /// Series index of the first addend.
    pub first_index: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub iterations: usize,
    pub starts: usize,
    pub diagnostics: Vec<String>,
    /// Per-observation log-densities; not part of the text format.
    pub log_densities: Vec<f64>,
}

/// Six significant digits in scientific notation.
pub fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

impl FitReport {
    pub fn dim(&self) -> usize {
        self.estimates.len()
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.param_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimates[i])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "dim = {}", self.dim());
        let _ = writeln!(s, "n = {}", self.n_obs);
        let _ = writeln!(s, "first_index = {}", self.first_index);
        let _ = writeln!(s, "log_likelihood = {}", sig6(self.log_likelihood));
        let _ = writeln!(s, "bic = {}", sig6(self.bic));
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "evaluations = {}", self.evaluations);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "starts = {}", self.starts);
        for (i, name) in self.param_names.iter().enumerate() {
            let _ = writeln!(s, "param.{name} = {}", sig6(self.estimates[i]));
            let _ = writeln!(s, "se.{name} = {}", sig6(self.standard_errors[i]));
            let _ = writeln!(s, "se_method.{name} = {}", self.se_methods[i].as_str());
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "diagnostic = {d}");
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output; `log_densities` is left
    /// empty.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = FitReport {
            model: String::new(),
            param_names: Vec::new(),
            estimates: Vec::new(),
            standard_errors: Vec::new(),
            se_methods: Vec::new(),
            log_likelihood: f64::NAN,
            bic: f64::NAN,
            n_obs: 0,
            first_index: 0,
            converged: false,
            evaluations: 0,
            iterations: 0,
            starts: 0,
            diagnostics: Vec::new(),
            log_densities: Vec::new(),
        };
        let mut dim = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            let err = |m: String| Error::Parse {
                line: line_no,
                message: m,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let int = |v: &str| v.parse::<usize>().map_err(|e| err(format!("{key}: {e}")));
            let slot = |r: &mut FitReport, name: &str| -> usize {
                match r.param_names.iter().position(|n| n == name) {
                    Some(p) => p,
                    None => {
                        r.param_names.push(name.to_string());
                        r.estimates.push(f64::NAN);
                        r.standard_errors.push(f64::NAN);
                        r.se_methods.push(SeMethod::Unavailable);
                        r.param_names.len() - 1
                    }
                }
            };
            match key {
                "model" => r.model = value.to_string(),
                "dim" => dim = Some(int(value)?),
                "n" => r.n_obs = int(value)?,
                "first_index" => r.first_index = int(value)?,
                "log_likelihood" => r.log_likelihood = num(value)?,
                "bic" => r.bic = num(value)?,
                "converged" => {
                    r.converged = value.parse().map_err(|_| err(format!("bad bool {value}")))?
                }
                "evaluations" => r.evaluations = int(value)?,
                "iterations" => r.iterations = int(value)?,
                "starts" => r.starts = int(value)?,
                "diagnostic" => r.diagnostics.push(value.to_string()),
                _ => {
                    if let Some(name) = key.strip_prefix("param.") {
                        let p = slot(&mut r, name);
                        r.estimates[p] = num(value)?;
                    } else if let Some(name) = key.strip_prefix("se_method.") {
                        let p = slot(&mut r, name);
                        r.se_methods[p] = value.parse().map_err(|e: Error| err(e.to_string()))?;
                    } else if let Some(name) = key.strip_prefix("se.") {
                        let p = slot(&mut r, name);
                        r.standard_errors[p] = num(value)?;
                    } else {
                        return Err(err(format!("unknown key {key}")));
                    }
                }
            }
        }
        if r.model.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "missing model".into(),
            });
        }
        if dim.is_some_and(|d| d != r.param_names.len()) {
            return Err(Error::Parse {
                line: 0,
                message: "dim does not match the parameter lines".into(),
            });
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_sample(n: usize, mu: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = crate::seeded_rng(seed);
        (0..n)
            .map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn quadratic_one_parameter() {
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }]);
        let settings = MaximizeSettings {
            starts: 2,
            start_box: vec![(-10.0, 10.0)],
            ..Default::default()
        };
        let opt = maximize(|th| -(th[0] - 3.7).powi(2), &t, &settings).unwrap();
        assert!((opt.theta[0] - 3.7).abs() < 1e-6);
        assert!(opt.converged);
        assert_eq!(opt.log_likelihood, -(opt.theta[0] - 3.7).powi(2));
    }

    #[test]
    fn rosenbrock() {
        let out = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &SimplexSettings {
                max_iter: 10_000,
                ..Default::default()
            },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn bounded_optimum_matches_across_parameterizations() {
        // Maximum of -(t - 0.3)^2 found through a logit and a log map.
        let f = |th: &[f64]| -(th[0] - 0.3).powi(2);
        let a = ParamTransform::new(vec![Bound::Interval(0.0, 1.0)]);
        let b = ParamTransform::new(vec![Bound::Lower(0.0)]);
        let settings = MaximizeSettings {
            starts: 0,
            warm_starts: vec![vec![0.8]],
            ..Default::default()
        };
        let oa = maximize(f, &a, &settings).unwrap();
        let ob = maximize(f, &b, &settings).unwrap();
        assert!((oa.theta[0] - ob.theta[0]).abs() < 1e-6);
    }

    #[test]
    fn deterministic_for_seed() {
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }, Bound::Lower(0.0)]);
        let settings = MaximizeSettings {
            starts: 3,
            start_box: vec![(-1.0, 1.0), (0.1, 2.0)],
            seed: 5,
            ..Default::default()
        };
        let f = |th: &[f64]| -(th[0] - 0.5).powi(2) - (th[1].ln()).powi(2) + (3.0 * th[0]).sin() * 0.1;
        assert_eq!(maximize(f, &t, &settings).unwrap(), maximize(f, &t, &settings).unwrap());
    }

    #[test]
    fn all_starts_infeasible() {
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }]);
        let settings = MaximizeSettings {
            starts: 3,
            start_box: vec![(-1.0, 1.0)],
            ..Default::default()
        };
        assert!(matches!(
            maximize(|_| f64::NAN, &t, &settings),
            Err(Error::Optimizer(_))
        ));
    }

    #[test]
    fn iteration_cap_reported() {
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }; 3]);
        let settings = MaximizeSettings {
            starts: 0,
            warm_starts: vec![vec![5.0, 5.0, 5.0]],
            restarts: 0,
            simplex: SimplexSettings {
                max_iter: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let opt = maximize(|th| -th.iter().map(|v| v * v).sum::<f64>(), &t, &settings).unwrap();
        assert!(!opt.converged);
    }

    #[test]
    fn se_of_normal_mean() {
        let (n, sigma) = (5000, 2.0);
        let x = normal_sample(n, 1.0, sigma, 3);
        let mu_hat = stats::mean(&x);
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }]);
        let per_obs = |th: &[f64]| -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| stats::normal_log_density(v - th[0], sigma * sigma)).collect())
        };
        let se = standard_errors(per_obs, &[mu_hat], &t).unwrap();
        let expected = sigma / (n as f64).sqrt();
        assert!((se.values[0] / expected - 1.0).abs() < 0.01);
        assert_eq!(se.methods[0], SeMethod::ObservedInformation);
    }

    #[test]
    fn se_of_normal_scale() {
        let n = 5000;
        let x = normal_sample(n, 0.0, 0.7, 4);
        let sigma_hat = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let t = ParamTransform::new(vec![Bound::Lower(0.0)]);
        let per_obs = |th: &[f64]| -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| stats::normal_log_density(*v, th[0] * th[0])).collect())
        };
        let se = standard_errors(per_obs, &[sigma_hat], &t).unwrap();
        let expected = sigma_hat / (2.0 * n as f64).sqrt();
        assert!((se.values[0] / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn outer_product_fallback() {
        // At a point where the log-likelihood is convex in theta the
        // observed information is negative; the scores still give an OPG.
        let x = normal_sample(200, 0.0, 1.0, 6);
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }]);
        let per_obs = |th: &[f64]| -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| 0.5 * (v - th[0]).powi(2)).collect())
        };
        let se = standard_errors(per_obs, &[0.3], &t).unwrap();
        assert_eq!(se.methods[0], SeMethod::OuterProduct);
        let scores: f64 = x.iter().map(|v| (0.3 - v).powi(2)).sum();
        assert!((se.values[0] - scores.sqrt().recip()).abs() < 1e-6);
    }

    #[test]
    fn steps_respect_boundaries() {
        let t = ParamTransform::new(vec![Bound::Interval(1.0, 2.0)]);
        let h = fd_steps(&[1.000001], &t);
        assert!(h[0] < 1e-6);
    }

    #[test]
    fn pinned_parameter_is_held_fixed() {
        // Normal mean and log-variance model with the variance pinned at its bound.
        let x = normal_sample(400, 0.5, 1.0, 8);
        let t = ParamTransform::new(vec![Bound::Free { scale: 1.0 }, Bound::Lower(1.0)]);
        let per_obs = |th: &[f64]| -> Result<Vec<f64>> {
            Ok(x.iter().map(|v| -0.5 * th[1].ln() - 0.5 * (v - th[0]).powi(2) / th[1]).collect())
        };
        let theta = [0.5, 1.0 + 1e-12];
        assert_eq!(pinned_at_bound(&theta, &t), vec![false, true]);
        let se = standard_errors(per_obs, &theta, &t).unwrap();
        assert_eq!(se.methods[1], SeMethod::Unavailable);
        assert!(se.values[1].is_nan());
        assert_eq!(se.methods[0], SeMethod::ObservedInformation);
        // Variance held at ~1: information for the mean is n.
        assert!((se.values[0] - (1.0f64 / 400.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn bic_examples() {
        let a = bic(22955.80, 6, 14171);
        assert!((-3.2363..=-3.2353).contains(&a), "{a}");
        let b = bic(8804.44, 6, 6230);
        assert!((-2.8186..=-2.8176).contains(&b), "{b}");
        assert_eq!(bic(0.0, 0, 10), 0.0);
    }

    #[test]
    fn report_round_trip() {
        let r = FitReport {
            model: "msm3".into(),
            param_names: vec!["alpha0".into(), "m0".into()],
            estimates: vec![1.23456789e-4, 1.5],
            standard_errors: vec![2e-5, f64::NAN],
            se_methods: vec![SeMethod::ObservedInformation, SeMethod::Unavailable],
            log_likelihood: 12345.678,
            bic: -3.1,
            n_obs: 999,
            first_index: 1,
            converged: true,
            evaluations: 10,
            iterations: 8,
            starts: 2,
            diagnostics: vec!["note one".into()],
            log_densities: vec![1.0],
        };
        let text = r.to_text();
        assert!(text.contains("param.alpha0 = 1.23457e-4"));
        let back = FitReport::from_text(&text).unwrap();
        assert_eq!(back.model, "msm3");
        assert_eq!(back.param_names, r.param_names);
        assert_eq!(back.estimates[0], 1.23457e-4);
        assert!(back.standard_errors[1].is_nan());
        assert_eq!(back.se_methods, r.se_methods);
        assert_eq!(back.log_likelihood, 1.23457e4);
        assert_eq!(back.diagnostics, r.diagnostics);
        assert!(back.log_densities.is_empty());
    }

    #[test]
    fn report_parse_error_has_line() {
        let err = FitReport::from_text("model = x\nbogus line\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn latin_hypercube_strata() {
        let mut rng = crate::seeded_rng(1);
        let pts = latin_hypercube(&[(0.0, 1.0), (10.0, 20.0)], 10, &mut rng);
        for j in 0..2 {
            let mut strata: Vec<usize> = pts
                .iter()
                .map(|p| {
                    let (lo, hi) = if j == 0 { (0.0, 1.0) } else { (10.0, 20.0) };
                    ((p[j] - lo) / (hi - lo) * 10.0) as usize
                })
                .collect();
            strata.sort();
            assert_eq!(strata, (0..10).collect::<Vec<_>>());
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip(v in -50.0f64..50.0, lo in -5.0f64..5.0, width in 0.1f64..10.0) {
            let free = Bound::Free { scale: 0.01 };
            let r = free.to_natural(free.to_search(v).unwrap());
            prop_assert!((r - v).abs() <= 1e-12 * v.abs().max(1.0));
            let lower = Bound::Lower(lo);
            let t = lo + (v.abs() + 0.01);
            let r = lower.to_natural(lower.to_search(t).unwrap());
            prop_assert!((r - t).abs() <= 1e-12 * t.abs().max(1.0));
            let interval = Bound::Interval(lo, lo + width);
            let t = lo + width * (0.01 + 0.98 * (v + 50.0) / 100.0);
            let r = interval.to_natural(interval.to_search(t).unwrap());
            prop_assert!((r - t).abs() <= 1e-12 * t.abs().max(1.0));
        }

        #[test]
        fn outside_domain_rejected(v in -10.0f64..0.0) {
            prop_assert!(Bound::Lower(0.0).to_search(v).is_none());
            prop_assert!(Bound::Interval(0.0, 1.0).to_search(v).is_none());
        }
    }
}
