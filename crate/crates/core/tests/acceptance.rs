//! Acceptance suite. Prints one verdict line per criterion with the measured
//! values against their tolerances, then checks that every criterion either
//! passes or fails exactly as analysed (criteria 3, 4 and 10 are not
//! attainable as stated; see the README).

use std::process::ExitCode;

use btq_core::asymptotics::{decay_rate, Check};
use btq_core::verify::{verify_all, CriterionResult, VerifyReport, SUITE_SECONDS};

/// Criteria whose literal thresholds the mathematics does not meet.
const EXPECTED_FAIL: [u8; 3] = [3, 4, 10];

fn describe(c: &Check) -> String {
    let v = c.value.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
    let verdict = if c.pass { "ok" } else { "FAIL" };
    format!("{} = {v} {} {:e} {verdict}", c.name, c.relation.symbol(), c.threshold)
}

fn line(c: &CriterionResult) -> String {
    let checks: Vec<String> = c.checks.iter().filter(|c| c.gating).map(describe).collect();
    format!("criterion {:>2}: {}  {}  [{}]", c.id, if c.pass { "PASS" } else { "FAIL" }, c.title, checks.join("; "))
}

struct Audit<'a> {
    report: &'a VerifyReport,
    problems: Vec<String>,
}

impl Audit<'_> {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.problems.push(what.into());
        }
    }

    fn criterion(&self, id: u8) -> &CriterionResult {
        self.report.criterion(id).unwrap_or_else(|| panic!("criterion {id} missing"))
    }

    fn value(&self, id: u8, check: &str) -> f64 {
        self.criterion(id).check(check).and_then(|c| c.value).unwrap_or(f64::NAN)
    }

    fn diag(&self, id: u8, key: &str) -> f64 {
        self.criterion(id).diagnostics.get(key).copied().unwrap_or(f64::NAN)
    }

    fn samples(&self, id: u8, series: &str) -> Vec<(usize, f64)> {
        self.criterion(id).series(series).map(|s| s.samples.clone()).unwrap_or_default()
    }

    /// Samples agree with `exact(m)` and the fitted rate is the closed
    /// form's own log-log slope.
    fn closed_form(&mut self, id: u8, series: &str, check: &str, exact: impl Fn(f64) -> f64) {
        let samples = self.samples(id, series);
        let err = samples.iter().map(|&(m, v)| (v - exact(m as f64)).abs()).fold(0.0, f64::max);
        self.require(!samples.is_empty() && err < 1e-9, format!("{series}: deviates from closed form by {err:e}"));
        let oracle: Vec<(usize, f64)> = samples.iter().map(|&(m, _)| (m, exact(m as f64))).collect();
        let rate = decay_rate(&oracle).unwrap_or(f64::NAN);
        let got = self.value(id, check);
        self.require((got - rate).abs() < 1e-8, format!("{check}: {got} vs closed-form slope {rate}"));
    }

    fn documented_failures(&mut self) {
        // 3: the defect is exactly 4m/(m+2)^2, so the slope over 8..64 is ~0.82.
        self.closed_form(3, "dirac[x1,x2]", "dirac_rate[x1,x2]", |m| 4.0 * m / ((m + 2.0) * (m + 2.0)));
        self.require(
            self.criterion(3).check("dirac_decrease[x1,x2]").is_some_and(|c| c.pass),
            "dirac defect must decrease",
        );
        self.require(self.diag(3, "dirac_tail_rate[x1,x2]") > 0.9, "dirac tail rate should approach 1");
        self.require(
            (self.diag(3, "dirac_scaled_limit[x1,x2]") - 4.0).abs() < 0.05,
            "m * dirac defect should tend to 4",
        );

        // 4: (x3, x3) is exactly 1/(m+3); (x1, x2) is O(1/m) with unit constant.
        self.closed_form(4, "product[x3,x3]", "product_rate[x3,x3]", |m| 1.0 / (m + 3.0));
        let r12 = self.value(4, "product_rate[x1,x2]");
        self.require((0.8..0.9).contains(&r12), format!("product rate (x1,x2) {r12} outside analysed band"));
        for pair in ["x1,x2", "x3,x3"] {
            let limit = self.diag(4, &format!("product_scaled_limit[{pair}]"));
            self.require(
                (limit - 1.0).abs() < 0.05,
                format!("m * product defect ({pair}) should tend to 1, got {limit}"),
            );
            let tail = self.diag(4, &format!("product_tail_rate[{pair}]"));
            self.require(tail > 0.9, format!("product tail rate ({pair}) {tail}"));
        }

        // 10: the deformed correction is O(1/m), not constant in m.
        let c10 = self.criterion(10);
        let failing: Vec<&str> = c10.checks.iter().filter(|c| c.gating && !c.pass).map(|c| c.name.as_str()).collect();
        self.require(
            failing == ["deformed_sphere:fs_correction_variation"],
            format!("criterion 10 should fail only on the deformed variation, failed {failing:?}"),
        );
        let rate = self.diag(10, "deformed_sphere:fs_correction_rate");
        self.require((0.7..1.1).contains(&rate), format!("deformed correction rate {rate}"));
        let scaled = self.diag(10, "deformed_sphere:fs_scaled_variation");
        self.require(scaled < 0.25, format!("m * correction varies by {scaled}"));
    }
}

fn main() -> ExitCode {
    let report = match verify_all() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance: suite error: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("acceptance suite ({} criteria)", report.criteria.len());
    for c in &report.criteria {
        println!("{}", line(c));
    }
    println!(
        "timing: {:.1} s first run, {:.1} s repeat (limit {SUITE_SECONDS} s)",
        report.timing.total_seconds,
        report.timing.repeat_seconds.unwrap_or(f64::NAN)
    );

    let mut audit = Audit { report: &report, problems: Vec::new() };
    audit.require(report.criteria.len() == 16, "expected 16 criteria");
    for c in &report.criteria {
        let expected = !EXPECTED_FAIL.contains(&c.id);
        audit.require(c.pass == expected, format!("criterion {} verdict {} unexpected", c.id, c.pass));
    }
    audit.documented_failures();

    let failed: Vec<String> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
    println!(
        "{}/16 PASS; FAIL as analysed: {}",
        16 - failed.len(),
        if failed.is_empty() { "none".to_string() } else { failed.join(", ") }
    );
    if audit.problems.is_empty() {
        println!("acceptance: all verdicts and failure analyses confirmed");
        ExitCode::SUCCESS
    } else {
        for p in &audit.problems {
            println!("acceptance problem: {p}");
        }
        ExitCode::FAILURE
    }
}
