use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{decay_rate, extract_c1, power_law_fit, richardson_fit, richardson_fit_complex, star_remainder, tail_rate};
use super::{AsymptoticFit, AsymptoticsError};
use crate::coherent::{berezin_transform, bergman_diag, fs_correction, BerezinRoute};
use crate::exec;
use crate::geometry::{parse_observable, sup_norm, ChartPoint, KahlerModel, ModelKind, Observable};
use crate::hilbert::{LevelCache, QuantumLevel, Resolution, ResolutionAudit};
use crate::operators::{dirac_defect, op_norm, product_defect, spectral_measure_gap, toeplitz, trace_gap};

/// Defects at or below this are treated as exactly zero.
pub const EXACT_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Norms,
    Dirac,
    Product,
    Berezin,
    Star,
    Trace,
    Spectral,
    Umexpand,
    Fspullback,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Norms,
        ExperimentKind::Dirac,
        ExperimentKind::Product,
        ExperimentKind::Berezin,
        ExperimentKind::Star,
        ExperimentKind::Trace,
        ExperimentKind::Spectral,
        ExperimentKind::Umexpand,
        ExperimentKind::Fspullback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Norms => "norms",
            ExperimentKind::Dirac => "dirac",
            ExperimentKind::Product => "product",
            ExperimentKind::Berezin => "berezin",
            ExperimentKind::Star => "star",
            ExperimentKind::Trace => "trace",
            ExperimentKind::Spectral => "spectral",
            ExperimentKind::Umexpand => "umexpand",
            ExperimentKind::Fspullback => "fspullback",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Kinds whose observables come in `(f, g)` pairs.
    pub fn takes_pairs(self) -> bool {
        matches!(self, ExperimentKind::Dirac | ExperimentKind::Product | ExperimentKind::Star)
    }
}

/// Pass/fail thresholds. Defaults are the acceptance tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub rate_min: f64,
    pub norm_sandwich_c: f64,
    pub norm_upper_slack: f64,
    pub limit_tol: f64,
    pub berezin_rel_tol: f64,
    pub route_tol: f64,
    pub antisym_rel_tol: f64,
    pub c0_product_tol: f64,
    pub remainder_rate_min: f64,
    pub consistency_factor: f64,
    pub trace_unit_tol: f64,
    pub trace_bound: f64,
    pub spectral_tol: f64,
    pub um_spread_tol: f64,
    pub um_c0_tol: f64,
    pub fs_round_tol: f64,
    pub fs_variation_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rate_min: 0.9,
            norm_sandwich_c: 4.0,
            norm_upper_slack: 1e-9,
            limit_tol: 1e-3,
            berezin_rel_tol: 0.05,
            route_tol: 1e-8,
            antisym_rel_tol: 0.05,
            c0_product_tol: 0.01,
            remainder_rate_min: 1.8,
            consistency_factor: 2.0,
            trace_unit_tol: 1e-10,
            trace_bound: 1.0,
            spectral_tol: 0.05,
            um_spread_tol: 1e-9,
            um_c0_tol: 0.02,
            fs_round_tol: 1e-6,
            fs_variation_max: 0.25,
        }
    }
}

impl Thresholds {
    pub const KEYS: [&'static str; 17] = [
        "rate_min",
        "norm_sandwich_c",
        "norm_upper_slack",
        "limit_tol",
        "berezin_rel_tol",
        "route_tol",
        "antisym_rel_tol",
        "c0_product_tol",
        "remainder_rate_min",
        "consistency_factor",
        "trace_unit_tol",
        "trace_bound",
        "spectral_tol",
        "um_spread_tol",
        "um_c0_tol",
        "fs_round_tol",
        "fs_variation_max",
    ];

    /// Sets a threshold by name; returns `false` for an unknown key.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "rate_min" => &mut self.rate_min,
            "norm_sandwich_c" => &mut self.norm_sandwich_c,
            "norm_upper_slack" => &mut self.norm_upper_slack,
            "limit_tol" => &mut self.limit_tol,
            "berezin_rel_tol" => &mut self.berezin_rel_tol,
            "route_tol" => &mut self.route_tol,
            "antisym_rel_tol" => &mut self.antisym_rel_tol,
            "c0_product_tol" => &mut self.c0_product_tol,
            "remainder_rate_min" => &mut self.remainder_rate_min,
            "consistency_factor" => &mut self.consistency_factor,
            "trace_unit_tol" => &mut self.trace_unit_tol,
            "trace_bound" => &mut self.trace_bound,
            "spectral_tol" => &mut self.spectral_tol,
            "um_spread_tol" => &mut self.um_spread_tol,
            "um_c0_tol" => &mut self.um_c0_tol,
            "fs_round_tol" => &mut self.fs_round_tol,
            "fs_variation_max" => &mut self.fs_variation_max,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub kind: ExperimentKind,
    /// First observables (expressions over the model's built-in names).
    pub f: Vec<String>,
    /// Partner observables for pair kinds, same length as `f`.
    pub g: Vec<String>,
    pub ladder: Vec<usize>,
    pub n_res: Option<usize>,
    /// Order `J` of the `1/m` fits; `None` uses the kind's default.
    pub fit_order: Option<usize>,
    /// Number of evaluation points for pointwise experiments.
    pub points: usize,
    /// Exponent `p` of the spectral test function `λ^p`.
    pub spectral_power: u32,
    /// Largest level used for the order-two star remainder.
    pub remainder_max_m: usize,
    pub thresholds: Thresholds,
}

/// Default ladder for a model and experiment kind.
pub fn default_ladder(model: &ModelKind, kind: ExperimentKind) -> Vec<usize> {
    let torus = matches!(model, ModelKind::Torus { .. });
    match kind {
        ExperimentKind::Berezin | ExperimentKind::Spectral => vec![8, 12, 16, 24, 32],
        ExperimentKind::Fspullback => vec![8, 16, 32],
        _ if torus => vec![8, 12, 16, 24, 32, 48],
        _ => vec![8, 12, 16, 24, 32, 48, 64],
    }
}

/// Default observables `(f, g)` for a model and experiment kind.
pub fn default_observables(model: &ModelKind, kind: ExperimentKind) -> (Vec<String>, Vec<String>) {
    let torus = matches!(model, ModelKind::Torus { .. });
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match (kind, torus) {
        (ExperimentKind::Norms, false) => (v(&["x1", "x3", "x3^2"]), vec![]),
        (ExperimentKind::Norms, true) => (v(&["re(f_1_0)", "f_1_1"]), vec![]),
        (ExperimentKind::Dirac, false) => (v(&["x1"]), v(&["x2"])),
        (ExperimentKind::Dirac, true) => (v(&["re(f_1_0)", "re(f_1_0)"]), v(&["im(f_1_0)", "re(f_0_1)"])),
        (ExperimentKind::Product, false) => (v(&["x1", "x3"]), v(&["x2", "x3"])),
        (ExperimentKind::Product, true) => (v(&["f_1_0", "re(f_1_0)"]), v(&["f_m1_0", "re(f_0_1)"])),
        (ExperimentKind::Berezin, false) => (v(&["x3", "y2_m2"]), vec![]),
        (ExperimentKind::Berezin, true) => (v(&["f_1_0 + f_m1_0"]), vec![]),
        (ExperimentKind::Star, false) => (v(&["x1"]), v(&["x2"])),
        (ExperimentKind::Star, true) => (v(&["re(f_1_0)"]), v(&["re(f_0_1)"])),
        (ExperimentKind::Trace, false) => (v(&["one", "x3^2"]), vec![]),
        (ExperimentKind::Trace, true) => (v(&["one", "re(f_1_1)"]), vec![]),
        (ExperimentKind::Spectral, false) => (v(&["x3"]), vec![]),
        (ExperimentKind::Spectral, true) => (v(&["re(f_1_0)"]), vec![]),
        (ExperimentKind::Umexpand | ExperimentKind::Fspullback, _) => (vec![], vec![]),
    }
}

impl ExperimentSpec {
    /// Spec with every default applied.
    pub fn new(model: ModelKind, kind: ExperimentKind) -> Self {
        let (f, g) = default_observables(&model, kind);
        Self {
            model,
            kind,
            f,
            g,
            ladder: default_ladder(&model, kind),
            n_res: None,
            fit_order: None,
            points: match kind {
                ExperimentKind::Star | ExperimentKind::Fspullback => 10,
                ExperimentKind::Umexpand => 50,
                _ => 40,
            },
            spectral_power: 2,
            remainder_max_m: 48,
            thresholds: Thresholds::default(),
        }
    }

    pub fn fit_order(&self) -> usize {
        self.fit_order.unwrap_or(match self.kind {
            ExperimentKind::Norms => 4,
            _ => 2,
        })
    }

    pub fn resolution(&self) -> Resolution {
        self.n_res.map_or(Resolution::Auto, Resolution::Fixed)
    }

    /// Checks the spec against the model and returns the parsed observables.
    pub fn validate(&self) -> Result<(KahlerModel, Vec<Observable>, Vec<Observable>), AsymptoticsError> {
        let invalid = |s: String| AsymptoticsError::InvalidExperiment(s);
        let model = KahlerModel::new(self.model)?;
        if self.ladder.is_empty() || self.ladder[0] == 0 || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("ladder must be positive and strictly increasing".into()));
        }
        let needed = match self.kind {
            ExperimentKind::Trace | ExperimentKind::Spectral | ExperimentKind::Fspullback => 2,
            _ => self.fit_order() + 2,
        };
        if self.ladder.len() < needed {
            return Err(AsymptoticsError::TooFewSamples { needed, got: self.ladder.len() });
        }
        if let Some(n) = self.n_res {
            if n < 8 {
                return Err(invalid(format!("n_res = {n} below 8")));
            }
        }
        if self.points == 0 {
            return Err(invalid("points must be positive".into()));
        }
        let parse = |xs: &[String]| xs.iter().map(|e| parse_observable(&model, e)).collect::<Result<Vec<_>, _>>();
        let (f, g) = (parse(&self.f)?, parse(&self.g)?);
        let needs_f = !matches!(self.kind, ExperimentKind::Umexpand | ExperimentKind::Fspullback);
        if needs_f && f.is_empty() {
            return Err(invalid(format!("experiment {} needs at least one observable", self.kind.name())));
        }
        if self.kind.takes_pairs() && f.len() != g.len() {
            return Err(invalid(format!("{} observables f but {} partners g", f.len(), g.len())));
        }
        if !self.kind.takes_pairs() && !g.is_empty() {
            return Err(invalid(format!("experiment {} takes no partner observables", self.kind.name())));
        }
        if matches!(self.kind, ExperimentKind::Trace | ExperimentKind::Spectral) {
            if let Some(bad) = f.iter().find(|o| !o.is_real()) {
                return Err(invalid(format!("observable `{}` must be real", bad.name())));
            }
        }
        if self.kind == ExperimentKind::Star && !self.ladder.iter().any(|&m| m <= self.remainder_max_m) {
            return Err(invalid("no level at or below remainder_max_m".into()));
        }
        Ok((model, f, g))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
            Relation::Ge => value >= threshold,
            Relation::Gt => value > threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

/// A thresholded scalar outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity is undefined; see `note`.
    pub value: Option<f64>,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
    /// Non-gating checks are reported but do not decide the run.
    pub gating: bool,
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            relation,
            threshold,
            pass: value.is_finite() && relation.holds(value, threshold),
            gating: true,
            note: None,
        }
    }

    pub fn undefined(name: impl Into<String>, relation: Relation, threshold: f64, pass: bool, note: &str) -> Self {
        Self { name: name.into(), value: None, relation, threshold, pass, gating: true, note: Some(note.to_string()) }
    }

    pub fn advisory(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }
}

/// A sampled quantity over the ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub samples: Vec<(usize, f64)>,
    pub fit: Option<AsymptoticFit>,
    /// Threshold of the check this series feeds, if any.
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
}

impl Series {
    fn new(name: impl Into<String>, samples: Vec<(usize, f64)>, fit: Option<AsymptoticFit>) -> Self {
        Self { name: name.into(), samples, fit, threshold: None, pass: None }
    }

    fn judged(mut self, check: &Check) -> Self {
        self.threshold = Some(check.threshold);
        self.pass = Some(check.pass);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub m: usize,
    pub dim: usize,
    pub audit: ResolutionAudit,
}

/// Wall-clock data; the only part of a report that varies between runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub level_seconds: Vec<(usize, f64)>,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub levels: Vec<LevelInfo>,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    pub diagnostics: BTreeMap<String, f64>,
    pub passed: bool,
    pub timing: Timing,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.gating && !c.pass)
    }
}

/// Deterministic, well spread evaluation points (Kronecker sequence in the
/// natural parameters of the model).
pub fn test_points(model: &KahlerModel, n: usize) -> Vec<ChartPoint> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (0..n)
        .map(|i| {
            let s = (0.5 + A1 * i as f64).fract();
            let t = (0.5 + A2 * i as f64).fract();
            if model.is_sphere() {
                model.point_at(-0.95 + 1.9 * s, 2.0 * PI * t)
            } else {
                model.point_at(s, t)
            }
        })
        .collect()
}

/// Deterministic scattered sample of `n` node indices out of `len` (all
/// nodes when `n >= len`).
pub fn node_sample(len: usize, n: usize) -> impl Iterator<Item = usize> {
    let n = n.min(len);
    let all = n == len;
    (0..n).map(move |i| if all { i } else { (i * 97 + 13) % len })
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    model: KahlerModel,
    levels: Vec<QuantumLevel>,
    series: Vec<Series>,
    checks: Vec<Check>,
    diagnostics: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn diag(&mut self, key: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.diagnostics.insert(key.into(), value);
        }
    }

    fn ms(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.m()).collect()
    }

    fn per_level<T: Send>(
        &self,
        f: impl Fn(&QuantumLevel) -> Result<T, AsymptoticsError> + Sync + Send,
    ) -> Result<Vec<T>, AsymptoticsError> {
        exec::map(&self.levels, f).into_iter().collect()
    }
}

fn pair_name(f: &Observable, g: &Observable) -> String {
    format!("{},{}", f.name(), g.name())
}

/// Runs an experiment over its ladder. Deterministic apart from `timing`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report, AsymptoticsError> {
    run_experiment_cached(spec, &LevelCache::new())
}

/// As [`run_experiment`], taking levels from `cache` when present. Level
/// timings then record the lookup rather than the build.
pub fn run_experiment_cached(spec: &ExperimentSpec, cache: &LevelCache) -> Result<Report, AsymptoticsError> {
    let start = Instant::now();
    let (model, fs, gs) = spec.validate()?;
    let resolution = spec.resolution();
    let built: Vec<Result<(QuantumLevel, f64), AsymptoticsError>> = exec::map(&spec.ladder, |&m| {
        let t = Instant::now();
        let level: QuantumLevel = (*cache.get_or_build(&model, m, resolution)?).clone();
        Ok((level, t.elapsed().as_secs_f64()))
    });
    let mut levels = Vec::with_capacity(built.len());
    let mut level_seconds = Vec::with_capacity(built.len());
    for b in built {
        let (lv, secs) = b?;
        level_seconds.push((lv.m(), secs));
        levels.push(lv);
    }
    let mut ctx = Ctx { spec, model, levels, series: vec![], checks: vec![], diagnostics: BTreeMap::new() };
    match spec.kind {
        ExperimentKind::Norms => norms(&mut ctx, &fs)?,
        ExperimentKind::Dirac => defects(&mut ctx, &fs, &gs, true)?,
        ExperimentKind::Product => defects(&mut ctx, &fs, &gs, false)?,
        ExperimentKind::Berezin => berezin(&mut ctx, &fs)?,
        ExperimentKind::Star => star(&mut ctx, &fs, &gs)?,
        ExperimentKind::Trace => trace(&mut ctx, &fs)?,
        ExperimentKind::Spectral => spectral(&mut ctx, &fs)?,
        ExperimentKind::Umexpand => umexpand(&mut ctx)?,
        ExperimentKind::Fspullback => fspullback(&mut ctx)?,
    }
    let levels = ctx.levels.iter().map(|l| LevelInfo { m: l.m(), dim: l.dim(), audit: l.audit().clone() }).collect();
    let mut checks = ctx.checks;
    checks.push(Check::new(
        "resolution_audit",
        ctx.levels.iter().filter(|l| !l.audit().passed()).count() as f64,
        Relation::Le,
        0.0,
    ));
    let passed = checks.iter().all(|c| !c.gating || c.pass);
    Ok(Report {
        spec: spec.clone(),
        levels,
        series: ctx.series,
        checks,
        diagnostics: ctx.diagnostics,
        passed,
        timing: Timing { total_seconds: start.elapsed().as_secs_f64(), level_seconds, parallel: exec::is_parallel() },
    })
}

fn norms(ctx: &mut Ctx, fs: &[Observable]) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let finest = ctx.levels.last().expect("ladder non-empty").grid().clone();
    for f in fs {
        let samples: Vec<(usize, f64)> = ctx.per_level(|lv| Ok((lv.m(), op_norm(&toeplitz(lv, f))?)))?;
        let sup = sup_norm(&ctx.model, f, &finest);
        let fit = richardson_fit(&samples, ctx.spec.fit_order())?;
        let upper = samples.iter().map(|&(_, n)| n - sup).fold(f64::NEG_INFINITY, f64::max);
        let lower =
            samples.iter().map(|&(m, n)| n - (sup - th.norm_sandwich_c / m as f64)).fold(f64::INFINITY, f64::min);
        let empirical_c = samples.iter().map(|&(m, n)| m as f64 * (sup - n)).fold(f64::NEG_INFINITY, f64::max);
        let name = f.name();
        let limit = Check::new(format!("norm_limit[{name}]"), (fit.c0() - sup).abs(), Relation::Le, th.limit_tol);
        ctx.series.push(Series::new(format!("norm[{name}]"), samples, Some(fit)).judged(&limit));
        ctx.checks.push(Check::new(format!("norm_upper[{name}]"), upper, Relation::Le, th.norm_upper_slack));
        ctx.checks.push(Check::new(format!("norm_lower[{name}]"), lower, Relation::Ge, 0.0));
        ctx.checks.push(limit);
        ctx.diag(format!("sup[{name}]"), sup);
        ctx.diag(format!("empirical_c[{name}]"), empirical_c);
    }
    Ok(())
}

fn defects(ctx: &mut Ctx, fs: &[Observable], gs: &[Observable], dirac: bool) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let label = if dirac { "dirac" } else { "product" };
    for (f, g) in fs.iter().zip(gs) {
        let samples: Vec<(usize, f64)> = ctx.per_level(|lv| {
            let d = if dirac { dirac_defect(lv, f, g)? } else { product_defect(lv, f, g)? };
            Ok((lv.m(), d))
        })?;
        let name = pair_name(f, g);
        let max = samples.iter().map(|s| s.1).fold(0.0, f64::max);
        ctx.diag(format!("{label}_max[{name}]"), max);
        if max <= EXACT_ZERO {
            let note = "defect vanishes to rounding at every level";
            let rate = Check::undefined(format!("{label}_rate[{name}]"), Relation::Ge, th.rate_min, true, note);
            ctx.series.push(Series::new(format!("{label}[{name}]"), samples, None).judged(&rate));
            ctx.checks.push(rate);
            ctx.checks.push(Check::undefined(format!("{label}_decrease[{name}]"), Relation::Lt, 1.0, true, note));
            continue;
        }
        let fit = power_law_fit(&samples)?;
        let rate = Check::new(format!("{label}_rate[{name}]"), fit.rate.expect("power law"), Relation::Ge, th.rate_min);
        let (first, last) = (samples[0].1, samples[samples.len() - 1].1);
        let scaled: Vec<(usize, f64)> = samples.iter().map(|&(m, d)| (m, m as f64 * d)).collect();
        if let Ok(sfit) = richardson_fit(&scaled, 2.min(scaled.len().saturating_sub(2))) {
            ctx.diag(format!("{label}_scaled_limit[{name}]"), sfit.c0());
        }
        if let Some(t) = tail_rate(&samples) {
            ctx.diag(format!("{label}_tail_rate[{name}]"), t);
        }
        ctx.series.push(Series::new(format!("{label}[{name}]"), samples, Some(fit)).judged(&rate));
        ctx.checks.push(rate);
        ctx.checks.push(Check::new(format!("{label}_decrease[{name}]"), last / first, Relation::Lt, 1.0));
    }
    Ok(())
}

fn berezin(ctx: &mut Ctx, fs: &[Observable]) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let pts = test_points(&ctx.model, ctx.spec.points);
    let ms = ctx.ms();
    for f in fs {
        let name = f.name().to_string();
        let fv: Vec<Complex64> = pts.iter().map(|p| f.value(p)).collect();
        let lap: Vec<Complex64> = pts.iter().map(|p| ctx.model.laplacian(f, p)).collect();
        let lap_max = lap.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let scale = if lap_max > 0.0 { lap_max } else { 1.0 };
        let per_level: Vec<(Vec<Complex64>, Option<f64>)> = ctx.per_level(|lv| {
            let sym = berezin_transform(lv, f, &pts, BerezinRoute::Symbolic)?;
            let agree = if lv.m() <= 32 {
                let int = berezin_transform(lv, f, &pts, BerezinRoute::Integral)?;
                Some(sym.iter().zip(&int).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
            } else {
                None
            };
            Ok((sym, agree))
        })?;
        let mut worst = 0.0f64;
        for (k, _) in pts.iter().enumerate() {
            let s: Vec<(usize, Complex64)> =
                ms.iter().zip(&per_level).map(|(&m, (sym, _))| (m, m as f64 * (sym[k] - fv[k]))).collect();
            let (c, _) = richardson_fit_complex(&s, ctx.spec.fit_order())?;
            worst = worst.max((c[0] - lap[k]).norm());
        }
        let raw: Vec<(usize, f64)> = ms
            .iter()
            .zip(&per_level)
            .map(|(&m, (sym, _))| {
                let e = (0..pts.len()).map(|k| (m as f64 * (sym[k] - fv[k]) - lap[k]).norm()).fold(0.0, f64::max);
                (m, e / scale)
            })
            .collect();
        let first = Check::new(format!("berezin_first_order[{name}]"), worst / scale, Relation::Le, th.berezin_rel_tol);
        ctx.series.push(Series::new(format!("berezin_unextrapolated_error[{name}]"), raw, None).judged(&first));
        ctx.checks.push(first);
        let agreement: Vec<f64> = per_level.iter().filter_map(|p| p.1).collect();
        if !agreement.is_empty() {
            let a = agreement.iter().copied().fold(0.0, f64::max);
            ctx.checks.push(Check::new(format!("route_agreement[{name}]"), a, Relation::Le, th.route_tol));
        }
    }
    Ok(())
}

fn star(ctx: &mut Ctx, fs: &[Observable], gs: &[Observable]) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let grid = ctx.levels[0].grid();
    let pts: Vec<ChartPoint> = node_sample(grid.len(), ctx.spec.points).map(|i| grid.points[i]).collect();
    let ms = ctx.ms();
    for (f, g) in fs.iter().zip(gs) {
        let name = pair_name(f, g);
        let a = extract_c1(&ctx.levels, f, g, &pts)?;
        let b = extract_c1(&ctx.levels, g, f, &pts)?;
        let mut antisym = 0.0f64;
        let mut analytic_gap = 0.0f64;
        for (p, q) in a.points.iter().zip(&b.points) {
            let br = ctx.model.poisson_bracket(f, g, &p.pt);
            let err = (p.value - q.value + Complex64::new(0.0, 1.0) * br).norm();
            antisym = antisym.max(err / (br.norm() + 0.01));
            let c1 = -(f.dz(&p.pt) * g.dzbar(&p.pt)) / ctx.model.metric_density(&p.pt);
            analytic_gap = analytic_gap.max((p.value - c1).norm());
        }
        ctx.checks.push(Check::new(format!("antisymmetry[{name}]"), antisym, Relation::Le, th.antisym_rel_tol));
        ctx.checks.push(Check::new(format!("c0_product[{name}]"), a.c0_error(), Relation::Le, th.c0_product_tol));
        ctx.diag(format!("c1_analytic_gap[{name}]"), analytic_gap);
        ctx.diag(format!("c1_max_residual[{name}]"), a.points.iter().map(|p| p.residual).fold(0.0, f64::max));

        let one = extract_c1(&ctx.levels, &Observable::one(), g, &pts)?;
        let null = one.points.iter().map(|p| p.value.norm() - p.residual).fold(f64::NEG_INFINITY, f64::max);
        ctx.checks.push(Check::new(format!("null_on_constants[{}]", g.name()), null, Relation::Le, 1e-10));

        let min_levels = 5.min(ms.len());
        if ms.len() > min_levels {
            let ratio = a.ladder_consistency(min_levels)?;
            ctx.checks.push(
                Check::new(format!("ladder_consistency[{name}]"), ratio, Relation::Le, th.consistency_factor)
                    .advisory()
                    .with_note("sub-ladders of at least five levels; ratio to full-ladder residual"),
            );
        }

        let targets: Vec<&QuantumLevel> = ctx.levels.iter().filter(|l| l.m() <= ctx.spec.remainder_max_m).collect();
        let rem = star_remainder(&ctx.levels, &targets, f, g)?;
        if rem.len() >= 2 && rem.iter().all(|r| r.1 > 0.0) {
            let fit = power_law_fit(&rem)?;
            let rate = Check::new(
                format!("remainder_rate[{name}]"),
                fit.rate.expect("power law"),
                Relation::Ge,
                th.remainder_rate_min,
            );
            ctx.series.push(Series::new(format!("star_remainder[{name}]"), rem, Some(fit)).judged(&rate));
            ctx.checks.push(rate);
        } else {
            ctx.series.push(Series::new(format!("star_remainder[{name}]"), rem, None));
        }
    }
    Ok(())
}

fn trace(ctx: &mut Ctx, fs: &[Observable]) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    for f in fs {
        let samples: Vec<(usize, f64)> = ctx.per_level(|lv| Ok((lv.m(), trace_gap(lv, f)?)))?;
        let name = f.name();
        let check = if name == "one" {
            let dev = samples.iter().map(|s| (s.1 - 1.0).abs()).fold(0.0, f64::max);
            Check::new("trace_unit", dev, Relation::Le, th.trace_unit_tol)
        } else {
            let max = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
            Check::new(format!("trace_bound[{name}]"), max, Relation::Le, th.trace_bound)
        };
        let fit = richardson_fit(&samples, ctx.spec.fit_order()).ok();
        ctx.series.push(Series::new(format!("trace_gap[{name}]"), samples, fit).judged(&check));
        ctx.checks.push(check);
    }
    Ok(())
}

fn spectral(ctx: &mut Ctx, fs: &[Observable]) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let p = ctx.spec.spectral_power as i32;
    let g = move |l: f64| l.powi(p);
    for f in fs {
        let samples: Vec<(usize, f64)> = ctx.per_level(|lv| Ok((lv.m(), spectral_measure_gap(lv, f, &g)?)))?;
        let name = f.name();
        let (m_last, last) = samples[samples.len() - 1];
        let gap = Check::new(format!("spectral_gap[{name}]"), last, Relation::Le, th.spectral_tol)
            .with_note(&format!("at m = {m_last}"));
        let steps = samples.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
        let fit = power_law_fit(&samples).ok();
        ctx.series.push(Series::new(format!("spectral_gap[{name}]"), samples, fit).judged(&gap));
        ctx.checks.push(gap);
        ctx.checks.push(Check::new(format!("spectral_decreasing[{name}]"), steps, Relation::Lt, 0.0));
    }
    Ok(())
}

fn umexpand(ctx: &mut Ctx) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let pts = test_points(&ctx.model, ctx.spec.points);
    let ms = ctx.ms();
    let vals: Vec<Vec<f64>> = ctx.per_level(|lv| Ok(pts.iter().map(|p| 2.0 * PI * bergman_diag(lv, p)).collect()))?;
    let mut c0_err = 0.0f64;
    for k in 0..pts.len() {
        let s: Vec<(usize, f64)> = ms.iter().zip(&vals).map(|(&m, v)| (m, v[k] / m as f64)).collect();
        c0_err = c0_err.max((richardson_fit(&s, ctx.spec.fit_order())?.c0() - 1.0).abs());
    }
    let mean: Vec<(usize, f64)> =
        ms.iter().zip(&vals).map(|(&m, v)| (m, v.iter().sum::<f64>() / v.len() as f64 / m as f64)).collect();
    let spread: Vec<f64> = vals
        .iter()
        .map(|v| {
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            (hi - lo) / (v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let lead = Check::new("um_leading", c0_err, Relation::Le, th.um_c0_tol);
    ctx.series.push(Series::new("um_mean_over_m", mean, None).judged(&lead));
    ctx.checks.push(lead);
    let max_spread = spread.iter().copied().fold(0.0, f64::max);
    ctx.diag("um_max_spread", max_spread);
    if !matches!(ctx.model.kind(), ModelKind::DeformedSphere { .. }) || ctx.model.epsilon() == 0.0 {
        // homogeneous models: 2π u_m = dim exactly
        let dev = ms
            .iter()
            .zip(&vals)
            .map(|(&m, v)| {
                let d = ctx.model.dim(m) as f64;
                v.iter().map(|x| (x - d).abs() / d).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        ctx.checks.push(Check::new("um_spread", max_spread, Relation::Le, th.um_spread_tol));
        ctx.checks.push(Check::new("um_exact", dev, Relation::Le, th.um_spread_tol));
    }
    Ok(())
}

fn fspullback(ctx: &mut Ctx) -> Result<(), AsymptoticsError> {
    let th = ctx.spec.thresholds.clone();
    let pts = test_points(&ctx.model, ctx.spec.points);
    let model = ctx.model;
    let per: Vec<(usize, f64, f64)> = ctx.per_level(|lv| {
        let mut worst = 0.0f64;
        let mut min_density = f64::INFINITY;
        for p in &pts {
            let c = fs_correction(lv, p)?;
            worst = worst.max(c.abs());
            min_density = min_density.min(lv.m() as f64 * model.metric_density(p) + c);
        }
        Ok((lv.m(), worst, min_density))
    })?;
    let samples: Vec<(usize, f64)> = per.iter().map(|p| (p.0, p.1)).collect();
    let min_density = per.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    ctx.checks.push(Check::new("fs_density_positive", min_density, Relation::Gt, 0.0));
    let variation = |xs: &[f64]| {
        let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    };
    let scaled: Vec<f64> = samples.iter().map(|&(m, c)| m as f64 * c).collect();
    for (&(m, _), s) in samples.iter().zip(&scaled) {
        ctx.diag(format!("fs_scaled_correction[{m}]"), *s);
    }
    ctx.diag("fs_scaled_variation", variation(&scaled));
    if let Ok(rate) = decay_rate(&samples) {
        ctx.diag("fs_correction_rate", rate);
    }
    let homogeneous = !matches!(model.kind(), ModelKind::DeformedSphere { .. }) || model.epsilon() == 0.0;
    let check = if homogeneous {
        Check::new(
            "fs_round_correction",
            samples.iter().map(|s| s.1).fold(0.0, f64::max),
            Relation::Le,
            th.fs_round_tol,
        )
    } else {
        let maxima: Vec<f64> = samples.iter().map(|s| s.1).collect();
        Check::new("fs_correction_variation", variation(&maxima), Relation::Lt, th.fs_variation_max)
    };
    ctx.series.push(Series::new("fs_correction_max", samples, None).judged(&check));
    ctx.checks.push(check);
    Ok(())
}
