use std::fs;

use btq_core::asymptotics::{run_experiment, ExperimentKind, ExperimentSpec, Report};
use btq_core::geometry::ModelKind;
use btq_core::report::{
    fits_csv, render_dir, samples_csv, strip_timing, write_report, write_verify, FITS_HEADER, REPORT_JSON,
    SAMPLES_HEADER,
};
use btq_core::verify::verify;
use serde_json::json;
use tempfile::TempDir;

fn dirac_report() -> Report {
    let mut spec = ExperimentSpec::new(ModelKind::RoundSphere, ExperimentKind::Dirac);
    spec.ladder = vec![8, 12, 16, 24];
    run_experiment(&spec).unwrap()
}

#[test]
fn samples_csv_rows_and_quoting() {
    let r = dirac_report();
    let csv = samples_csv(&r);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SAMPLES_HEADER);
    assert_eq!(lines.len(), 1 + 4);
    for (line, m) in lines[1..].iter().zip([8.0f64, 12.0, 16.0, 24.0]) {
        // the pair name contains a comma and must be quoted
        assert!(line.ends_with(",\"dirac[x1,x2]\""), "{line}");
        let cols: Vec<&str> = line.split(',').collect();
        let raw: f64 = cols[1].parse().unwrap();
        assert!((raw - 4.0 * m / ((m + 2.0) * (m + 2.0))).abs() < 1e-12);
        let fitted: f64 = cols[2].parse().unwrap();
        let residual: f64 = cols[3].parse().unwrap();
        assert_eq!(residual, (raw - fitted).abs());
        assert_eq!(cols[4], "0.9");
    }
}

#[test]
fn fits_csv_one_row_per_coefficient() {
    let r = dirac_report();
    let csv = fits_csv(&r);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(FITS_HEADER));
    let rows: Vec<&str> = lines.collect();
    let fit = r.series[0].fit.as_ref().unwrap();
    assert_eq!(rows.len(), fit.coefficients.len());
    assert!(rows[0].starts_with("\"dirac[x1,x2]\",power_law,"));
}

#[test]
fn series_without_fit_leave_columns_empty() {
    let mut spec = ExperimentSpec::new(ModelKind::RoundSphere, ExperimentKind::Umexpand);
    spec.ladder = vec![8, 12, 16, 24];
    spec.points = 5;
    let r = run_experiment(&spec).unwrap();
    let csv = samples_csv(&r);
    let row = csv.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!((cols[2], cols[3]), ("", ""));
    assert_eq!(fits_csv(&r).lines().count(), 1);
}

#[test]
fn strip_timing_is_recursive() {
    let v = json!({"a": 1, "timing": 2, "b": [{"timing": 3, "c": 4}], "d": {"timing": {"x": 1}, "e": 5}});
    assert_eq!(strip_timing(&v), json!({"a": 1, "b": [{"c": 4}], "d": {"e": 5}}));
}

#[test]
fn write_and_render_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("nested/run");
    let r = dirac_report();
    write_report(&r, &dir).unwrap();
    let back: Report = serde_json::from_str(&fs::read_to_string(dir.join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(back, r);
    let text = render_dir(&dir).unwrap();
    assert!(text.contains("dirac_rate[x1,x2]") && text.contains("overall"));

    let vdir = tmp.path().join("verify");
    write_verify(&verify(&[13]).unwrap(), &vdir).unwrap();
    assert!(render_dir(&vdir).unwrap().contains("1/1 criteria passed"));

    let err = render_dir(tmp.path()).unwrap_err();
    assert_eq!(err.module(), "report");
}
