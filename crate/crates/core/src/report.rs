//! Report serialization: `report.json`, `samples.csv`, `fits.csv` and a plain
//! text summary. Everything except the `timing` block is a deterministic
//! function of the spec.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::asymptotics::{FitForm, Report};
use crate::error::Error;
use crate::verify::VerifyReport;

pub const REPORT_JSON: &str = "report.json";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const FITS_CSV: &str = "fits.csv";
pub const VERIFY_JSON: &str = "verify.json";

pub const SAMPLES_HEADER: &str = "m,raw,fitted,residual,threshold,pass,series";
pub const FITS_HEADER: &str = "series,form,order,term,coefficient,residual,rate,condition";

/// The JSON report schema shipped with the crate.
pub const REPORT_SCHEMA: &str = include_str!("../../../docs/report.schema.json");

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per sample: raw value, fitted value and its absolute residual.
pub fn samples_csv(report: &Report) -> String {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in &report.series {
        for &(m, raw) in &s.samples {
            let fitted = s.fit.as_ref().map(|f| f.fitted(m));
            let residual = fitted.map(|f| (raw - f).abs());
            let _ = writeln!(
                out,
                "{m},{raw},{},{},{},{},{}",
                opt(fitted),
                opt(residual),
                opt(s.threshold),
                opt(s.pass),
                csv_field(&s.name)
            );
        }
    }
    out
}

/// One row per fitted coefficient `c_j` (`term = j`).
pub fn fits_csv(report: &Report) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for s in &report.series {
        let Some(fit) = &s.fit else { continue };
        let form = match fit.form {
            FitForm::InverseSeries => "inverse_series",
            FitForm::PowerLaw => "power_law",
        };
        for (j, c) in fit.coefficients.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{form},{},{j},{c},{},{},{}",
                csv_field(&s.name),
                fit.order,
                fit.residual,
                opt(fit.rate),
                fit.condition
            );
        }
    }
    out
}

pub fn report_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `samples.csv` and `fits.csv` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, REPORT_JSON, &report_json(report))?;
    write(dir, SAMPLES_CSV, &samples_csv(report))?;
    write(dir, FITS_CSV, &fits_csv(report))
}

pub fn write_verify(report: &VerifyReport, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, VERIFY_JSON, &serde_json::to_string_pretty(report).expect("verify report serializes"))
}

/// Copy of a serialized report with every `timing` block removed; what must
/// be identical between runs.
pub fn strip_timing(v: &Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.iter().filter(|(k, _)| *k != "timing").map(|(k, v)| (k.clone(), strip_timing(v))).collect(),
        ),
        Value::Array(xs) => Value::Array(xs.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.6e}"))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Human-readable summary of an experiment report.
pub fn summarize(report: &Report) -> String {
    let mut out = String::new();
    let spec = &report.spec;
    let _ = writeln!(out, "experiment {} on {}  ladder {:?}", spec.kind.name(), spec.model.name(), spec.ladder);
    for s in &report.series {
        let _ = writeln!(out, "\n  {}", s.name);
        for &(m, v) in &s.samples {
            let _ = writeln!(out, "    m = {m:>4}  {v:.9e}");
        }
        if let Some(fit) = &s.fit {
            let coeffs: Vec<String> = fit.coefficients.iter().map(|c| format!("{c:.6e}")).collect();
            let _ = writeln!(out, "    fit [{}]  residual {:.2e}", coeffs.join(", "), fit.residual);
            if let Some(rate) = fit.rate {
                let _ = writeln!(out, "    rate {rate:.4}");
            }
        }
    }
    let _ = writeln!(out, "\n  checks");
    for c in &report.checks {
        let gate = if c.gating { "" } else { "  (advisory)" };
        let _ = writeln!(
            out,
            "    {:<5} {:<40} {} {} {:e}{gate}",
            verdict(c.pass),
            c.name,
            fmt_value(c.value),
            c.relation.symbol(),
            c.threshold
        );
    }
    if !report.diagnostics.is_empty() {
        let _ = writeln!(out, "\n  diagnostics");
        for (k, v) in &report.diagnostics {
            let _ = writeln!(out, "    {k:<40} {v:.6e}");
        }
    }
    let _ = writeln!(out, "\n  overall {}", verdict(report.passed));
    out
}

/// Acceptance table: one line per criterion.
pub fn summarize_verify(report: &VerifyReport) -> String {
    let mut out = String::new();
    for c in &report.criteria {
        let _ = writeln!(out, "criterion {:>2}  {}  {}", c.id, verdict(c.pass), c.title);
        for ch in c.checks.iter().filter(|ch| ch.gating && !ch.pass) {
            let _ = writeln!(
                out,
                "              {} = {} (need {} {:e})",
                ch.name,
                fmt_value(ch.value),
                ch.relation.symbol(),
                ch.threshold
            );
        }
    }
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    let _ = writeln!(out, "{passed}/{} criteria passed", report.criteria.len());
    out
}

/// Renders whatever report `dir` holds (`report.json` or `verify.json`).
pub fn render_dir(dir: &Path) -> Result<String, Error> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    };
    if dir.join(REPORT_JSON).exists() {
        let r: Report =
            serde_json::from_str(&read(REPORT_JSON)?).map_err(|e| Error::Report(format!("{REPORT_JSON}: {e}")))?;
        Ok(summarize(&r))
    } else if dir.join(VERIFY_JSON).exists() {
        let r: VerifyReport =
            serde_json::from_str(&read(VERIFY_JSON)?).map_err(|e| Error::Report(format!("{VERIFY_JSON}: {e}")))?;
        Ok(summarize_verify(&r))
    } else {
        Err(Error::Report(format!("no {REPORT_JSON} or {VERIFY_JSON} in {}", dir.display())))
    }
}
