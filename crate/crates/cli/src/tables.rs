//! Plain-text tables: 4 significant digits for parameters, 2 decimals for
//! log-likelihoods, 4 decimals for BIC, standard errors (or p-values) in
//! parentheses on a second row.

use levelmsm::fitting::FitReport;
use levelmsm::models::{ModelKind, ModelSpec};
use levelmsm::selection::VuongReport;

/// `x` with 4 significant digits, switching to exponent form outside
/// `[1e-4, 1e6)`.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "-".into() } else { format!("{x}") };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    // Rounding can carry into the next decade (9.9996 -> 10.000).
    let s = format!("{x:.decimals$}");
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 10f64.powi(mag + 1) && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: &str, headers: &[&str]) -> Self {
        Self {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let cols = self.headers.len();
        let mut width = vec![0; cols];
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            cells.join("  ").trim_end().to_string()
        };
        let rule = "-".repeat(width.iter().sum::<usize>() + 2 * (cols.saturating_sub(1)));
        let mut out = format!("{}\n{rule}\n{}\n{rule}\n", self.title, line(&self.headers));
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out.push_str(&rule);
        out.push('\n');
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out
    }
}

/// Provenance lines appended to every table file.
pub fn footer(config_hash: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("config sha256: {config_hash}\nseed: {seed}\n")
}

/// One displayed parameter column: header, parameter name, display factor.
type Column = (&'static str, &'static str, f64);

const CEV_COLUMNS: &[Column] = &[("alpha0", "alpha0", 1.0), ("gamma", "gamma", 1.0), ("sigma", "sigma", 1.0), ("nu", "nu", 1.0)];
const MSM_COLUMNS: &[Column] = &[
    ("10^3 x alpha0", "alpha0", 1e3),
    ("gamma", "gamma", 1.0),
    ("m0", "m0", 1.0),
    ("b", "b", 1.0),
    ("lambda_K", "lambda_k", 1.0),
    ("sigma", "sigma", 1.0),
];
const GARCH_COLUMNS: &[Column] = &[
    ("10^3 x alpha0", "alpha0", 1e3),
    ("gamma", "gamma", 1.0),
    ("10^5 x a0", "a0", 1e5),
    ("a1", "a1", 1.0),
    ("b", "b", 1.0),
    ("nu", "nu", 1.0),
];
const EGARCH_COLUMNS: &[Column] = &[
    ("10^3 x alpha0", "alpha0", 1e3),
    ("gamma", "gamma", 1.0),
    ("a0", "a0", 1.0),
    ("a1", "a1", 1.0),
    ("a2", "a2", 1.0),
    ("b", "b", 1.0),
    ("nu", "nu", 1.0),
];
const JUMP_COLUMNS: &[Column] = &[
    ("10^3 x alpha0", "alpha0", 1e3),
    ("gamma", "gamma", 1.0),
    ("10^6 x a0", "a0", 1e6),
    ("a1", "a1", 1.0),
    ("b", "b", 1.0),
    ("c", "c", 1.0),
    ("d", "d", 1.0),
    ("tau", "tau", 1.0),
];

fn value_cells(report: &FitReport, columns: &[Column]) -> (Vec<String>, Vec<String>) {
    columns
        .iter()
        .map(|&(_, name, factor)| match report.param_names.iter().position(|n| n == name) {
            Some(i) => (
                sig4(report.estimates[i] * factor),
                format!("({})", sig4(report.standard_errors[i] * factor)),
            ),
            None => (String::new(), String::new()),
        })
        .unzip()
}

fn headers(first: &str, columns: &[Column], tail: &[&str]) -> Vec<String> {
    std::iter::once(first)
        .chain(columns.iter().map(|c| c.0))
        .chain(tail.iter().copied())
        .map(String::from)
        .collect()
}

fn family_table(title: &str, first: &str, columns: &[Column], with_bic: bool) -> Table {
    let tail: &[&str] = if with_bic { &["log L", "BIC"] } else { &["log L"] };
    Table {
        title: title.into(),
        headers: headers(first, columns, tail),
        ..Table::default()
    }
}

fn report_rows(label: String, report: &FitReport, columns: &[Column], with_bic: bool) -> [Vec<String>; 2] {
    let (values, errors) = value_cells(report, columns);
    let mut top = vec![label];
    top.extend(values);
    top.push(format!("{:.2}", report.log_likelihood));
    let mut bottom = vec![String::new()];
    bottom.extend(errors);
    bottom.push(String::new());
    if with_bic {
        top.push(format!("{:.4}", report.bic));
        bottom.push(String::new());
    }
    [top, bottom]
}

fn push_report(table: &mut Table, label: String, report: &FitReport, columns: &[Column], with_bic: bool) {
    for row in report_rows(label, report, columns, with_bic) {
        table.push(row);
    }
}

/// Fitted reports grouped by model family, each family in its own table.
pub fn estimate_tables(reports: &[(ModelSpec, FitReport)], msm_vuong: &[(usize, VuongReport)]) -> Vec<Table> {
    let mut tables = Vec::new();
    let of = |pred: &dyn Fn(&ModelKind) -> bool| -> Vec<&(ModelSpec, FitReport)> {
        reports.iter().filter(|(s, _)| pred(&s.kind)).collect()
    };

    let cev = of(&|k| matches!(k, ModelKind::CevNormal | ModelKind::CevStudentT));
    if !cev.is_empty() {
        let mut t = family_table("CEV models", "Innovations", CEV_COLUMNS, false);
        for (spec, r) in cev {
            let label = match spec.kind {
                ModelKind::CevNormal => "Normal",
                _ => "t_nu",
            };
            push_report(&mut t, label.into(), r, CEV_COLUMNS, false);
        }
        tables.push(t);
    }

    let msm = of(&|k| matches!(k, ModelKind::Msm { .. }));
    if !msm.is_empty() {
        let mut t = family_table("Multifractal models", "K", MSM_COLUMNS, true);
        t.headers.push("Vuong".into());
        t.headers.push("HAC-adj.".into());
        let mut sorted = msm;
        sorted.sort_by_key(|(s, _)| match s.kind {
            ModelKind::Msm { levels } => levels,
            _ => 0,
        });
        for (spec, r) in sorted {
            let ModelKind::Msm { levels } = spec.kind else { continue };
            let [mut top, mut bottom] = report_rows(levels.to_string(), r, MSM_COLUMNS, true);
            // Reported against the highest order, sign flipped so that a
            // positive statistic favors the highest order.
            match msm_vuong.iter().find(|(k, _)| *k == levels) {
                Some((_, v)) => {
                    top.push(format!("{:.3}", -v.statistic));
                    top.push(format!("{:.3}", -v.statistic_hac));
                    bottom.push(format!("({})", p_value(v.p_value)));
                    bottom.push(format!("({})", p_value(v.p_value_hac)));
                }
                None => {
                    for row in [&mut top, &mut bottom] {
                        row.extend([String::new(), String::new()]);
                    }
                }
            }
            t.push(top);
            t.push(bottom);
        }
        t.notes.push(
            "Vuong: positive values favor the highest order; p-values in parentheses.".into(),
        );
        tables.push(t);
    }

    for (title, kind_is, columns) in [
        ("Level-GARCH", (|k: &ModelKind| matches!(k, ModelKind::Garch)) as fn(&ModelKind) -> bool, GARCH_COLUMNS),
        ("Level-EGARCH", |k: &ModelKind| matches!(k, ModelKind::Egarch), EGARCH_COLUMNS),
        ("Jump-diffusion", |k: &ModelKind| matches!(k, ModelKind::JumpDiffusion), JUMP_COLUMNS),
    ] {
        let rows = of(&kind_is);
        if rows.is_empty() {
            continue;
        }
        let mut t = family_table(title, "", columns, true);
        for (spec, r) in rows {
            push_report(&mut t, spec.id(), r, columns, true);
        }
        tables.push(t);
    }

    let linear: Vec<_> = reports.iter().filter(|(s, _)| s.linear_drift).collect();
    if !linear.is_empty() {
        let mut t = Table::new("Linear drift", &["Model", "10^3 x alpha0", "10^4 x alpha1"]);
        for (spec, r) in linear {
            let cell = |name: &str, factor: f64| {
                let i = r.param_names.iter().position(|n| n == name).expect("drift parameter");
                format!("{} ({})", sig4(r.estimates[i] * factor), sig4(r.standard_errors[i] * factor))
            };
            t.push(vec![spec.id(), cell("alpha0", 1e3), cell("alpha1", 1e4)]);
        }
        tables.push(t);
    }
    tables
}

/// Rows of the comparison table against `reference`.
pub fn comparison_table(
    reference: (&str, &FitReport),
    others: &[(String, FitReport, VuongReport)],
) -> Table {
    let mut t = Table::new(
        "In-sample model comparison",
        &["Model", "dim(theta)", "log L", "BIC", "Vuong", "HAC-adj."],
    );
    let (id, r) = reference;
    t.push(vec![
        id.to_string(),
        r.dim().to_string(),
        format!("{:.2}", r.log_likelihood),
        format!("{:.4}", r.bic),
        String::new(),
        String::new(),
    ]);
    for (id, r, v) in others {
        t.push(vec![
            id.clone(),
            r.dim().to_string(),
            format!("{:.2}", r.log_likelihood),
            format!("{:.4}", r.bic),
            format!("{:.3} ({})", v.statistic, p_value(v.p_value)),
            format!("{:.3} ({})", v.statistic_hac, p_value(v.p_value_hac)),
        ]);
    }
    t.notes.push(format!(
        "Negative statistics favor {id}; p-values (in parentheses) are Phi(statistic)."
    ));
    t
}
