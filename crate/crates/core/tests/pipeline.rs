//! End-to-end flows: CSV in, fitted reports and model comparisons out.

use std::fmt::Write as _;

use levelmsm::export::write_atomic;
use levelmsm::fitting::FitReport;
use levelmsm::market_data::{load_csv, CsvSpec};
use levelmsm::models::{fit_model, simulate_model, FitSettings, ModelSpec};
use levelmsm::selection::{vuong, Candidate};
use levelmsm::{Error, LogDensities};

fn write_series_csv(dir: &std::path::Path, values: &[f64]) -> std::path::PathBuf {
    let start = chrono::NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    let mut text = String::from("DATE,RATE\n");
    let mut day = 0;
    for (i, v) in values.iter().enumerate() {
        if i == 10 {
            // A missing-value marker, as in FRED downloads, in the other
            // accepted date format.
            let d = start + chrono::Duration::days(day);
            writeln!(text, "{},.", d.format("%m/%d/%Y")).unwrap();
            day += 1;
        }
        let d = start + chrono::Duration::days(day);
        writeln!(text, "{},{v}", d.format("%Y-%m-%d")).unwrap();
        day += 1;
    }
    let path = dir.join("rates.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn csv_fit_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec: ModelSpec = "cev-normal".parse().unwrap();
    let truth = [0.0004, 0.6, 0.04];
    let sim = simulate_model(&spec, &truth, 5.0, 4000, 3).unwrap();
    let path = write_series_csv(dir.path(), sim.series.values());

    let loaded = load_csv(&path, &CsvSpec::default()).unwrap();
    assert_eq!(loaded.series.len(), sim.series.len());
    assert_eq!(loaded.dropped_missing, 1);

    let fit = fit_model(&spec, &loaded.series, &FitSettings::default()).unwrap();
    assert!(fit.converged);
    for (i, name) in ["alpha0", "gamma", "sigma"].iter().enumerate() {
        let z = (fit.estimate(name).unwrap() - truth[i]) / fit.standard_errors[i];
        assert!(z.abs() < 4.0, "{name}: z = {z}");
    }

    let report_path = dir.path().join("cev.fit.txt");
    write_atomic(&report_path, fit.to_text().as_bytes()).unwrap();
    let back = FitReport::from_text(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(back.model, "cev-normal");
    assert_eq!(back.n_obs, fit.n_obs);
    assert!((back.log_likelihood / fit.log_likelihood - 1.0).abs() < 1e-5);
    for (a, b) in back.estimates.iter().zip(&fit.estimates) {
        assert!((a / b - 1.0).abs() < 1e-5);
    }
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "date,rate\n2000-01-03,5.1\n2000-01-04,abc\n").unwrap();
    match load_csv(&path, &CsvSpec::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn vuong_prefers_msm_on_msm_data() {
    let msm: ModelSpec = "msm3".parse().unwrap();
    let cev: ModelSpec = "cev-normal".parse().unwrap();
    let series = simulate_model(&msm, &[0.0, 0.3, 1.7, 3.0, 0.5, 0.05], 4.0, 3000, 8)
        .unwrap()
        .series;
    let settings = FitSettings::default();
    let f_cev = fit_model(&cev, &series, &settings).unwrap();
    let f_msm = fit_model(&msm, &series, &settings).unwrap();
    assert!(f_msm.log_likelihood > f_cev.log_likelihood);
    assert!(f_msm.bic < f_cev.bic);

    let d_cev = LogDensities::new(f_cev.first_index, f_cev.log_densities.clone());
    let d_msm = LogDensities::new(f_msm.first_index, f_msm.log_densities.clone());
    let r = vuong(Candidate::new(&d_cev, cev.dim()), Candidate::new(&d_msm, msm.dim())).unwrap();
    // Positive statistic favors the alternative (MSM) model.
    assert!(r.statistic > 3.0 && r.statistic_hac > 3.0, "{r:?}");
    assert!(r.p_value > 0.99);
}

#[test]
fn garch_fit_recovers_simulation() {
    let spec: ModelSpec = "garch-linear".parse().unwrap();
    let truth = [0.02, -0.004, 0.5, 2e-4, 0.1, 0.85, 6.0];
    let series = simulate_model(&spec, &truth, 5.0, 6000, 17).unwrap().series;
    let fit = fit_model(&spec, &series, &FitSettings::default()).unwrap();
    for (i, name) in spec.param_names().iter().enumerate() {
        let z = (fit.estimates[i] - truth[i]) / fit.standard_errors[i];
        assert!(z.abs() < 4.0, "{name}: {} vs {} (z = {z})", fit.estimates[i], truth[i]);
    }
}
