//! Experiment configuration files.
//!
//! Line-oriented `key = value` text with optional `[model]`, `[experiment]`
//! and `[thresholds]` sections. Keys before the first header may come from
//! any section. `#` starts a comment. Lists are comma separated; commas
//! inside parentheses belong to the item.
//!
//! ```text
//! [model]
//! model = deformed_sphere
//! epsilon = 0.1
//!
//! [experiment]
//! experiment = star
//! f = x1
//! g = x2
//! ladder = 8, 12, 16, 24, 32, 48, 64
//!
//! [thresholds]
//! remainder_rate_min = 1.8
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::asymptotics::{
    default_ladder, default_observables, AsymptoticsError, ExperimentKind, ExperimentSpec, Thresholds,
};
use crate::geometry::{parse_observable, GeometryError, KahlerModel, ModelKind, MODEL_NAMES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid `{field}`: {reason}")]
    ValidationError { field: String, reason: String },
}

fn invalid(field: &str, reason: impl ToString) -> ConfigError {
    ConfigError::ValidationError { field: field.to_string(), reason: reason.to_string() }
}

const MODEL_KEYS: [&str; 4] = ["model", "epsilon", "tau_re", "tau_im"];
const EXPERIMENT_KEYS: [&str; 10] =
    ["experiment", "f", "g", "ladder", "n_res", "fit_order", "points", "spectral_power", "remainder_max_m", "out"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Model,
    Experiment,
    Thresholds,
}

fn key_allowed(section: Section, key: &str) -> bool {
    let model = MODEL_KEYS.contains(&key);
    let exp = EXPERIMENT_KEYS.contains(&key);
    let th = Thresholds::KEYS.contains(&key);
    match section {
        Section::Top => model || exp || th,
        Section::Model => model,
        Section::Experiment => exp,
        Section::Thresholds => th,
    }
}

/// A parsed configuration: the experiment plus where to write its outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub out_dir: Option<PathBuf>,
}

/// Splits a list at commas outside parentheses.
pub fn split_list(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Parses a comma-separated ladder such as `8,16,32`.
pub fn parse_ladder(text: &str) -> Result<Vec<usize>, ConfigError> {
    split_list(text)
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| invalid("ladder", format!("`{s}` is not a positive integer"))))
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| invalid(key, format!("cannot parse `{v}`")))
}

/// Parses and validates a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut section = Section::Top;
    let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::ParseError {
                line: line_no,
                reason: "unterminated section header".into(),
            })?;
            section = match name.trim() {
                "model" => Section::Model,
                "experiment" => Section::Experiment,
                "thresholds" => Section::Thresholds,
                other => {
                    return Err(ConfigError::ParseError { line: line_no, reason: format!("unknown section `{other}`") })
                }
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::ParseError { line: line_no, reason: "expected `key = value`".into() })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::ParseError { line: line_no, reason: "empty key".into() });
        }
        if !key_allowed(section, key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if values.insert(key.to_string(), (line_no, value.to_string())).is_some() {
            return Err(ConfigError::ParseError { line: line_no, reason: format!("duplicate key `{key}`") });
        }
    }
    let get = |k: &str| values.get(k).map(|(_, v)| v.as_str());

    let model = match get("model") {
        None => return Err(invalid("model", "missing")),
        Some("round_sphere") => ModelKind::RoundSphere,
        Some("deformed_sphere") => ModelKind::DeformedSphere {
            epsilon: parse_num("epsilon", get("epsilon").ok_or_else(|| invalid("epsilon", "missing"))?)?,
        },
        Some("torus") => ModelKind::Torus {
            tau_re: get("tau_re").map_or(Ok(0.0), |v| parse_num("tau_re", v))?,
            tau_im: get("tau_im").map_or(Ok(1.0), |v| parse_num("tau_im", v))?,
        },
        Some(other) => {
            return Err(invalid("model", format!("`{other}` is not one of {}", MODEL_NAMES.join(", "))));
        }
    };
    if get("epsilon").is_some() && !matches!(model, ModelKind::DeformedSphere { .. }) {
        return Err(invalid("epsilon", "only applies to deformed_sphere"));
    }
    if (get("tau_re").is_some() || get("tau_im").is_some()) && !matches!(model, ModelKind::Torus { .. }) {
        return Err(invalid("tau", "only applies to torus"));
    }
    let kind_name = get("experiment").ok_or_else(|| invalid("experiment", "missing"))?;
    let kind = ExperimentKind::from_name(kind_name).ok_or_else(|| {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        invalid("experiment", format!("`{kind_name}` is not one of {}", names.join(", ")))
    })?;

    let mut spec = ExperimentSpec::new(model, kind);
    if get("f").is_some() || get("g").is_some() {
        let (df, dg) = default_observables(&model, kind);
        spec.f = get("f").map_or(df, split_list);
        spec.g = get("g").map_or(if kind.takes_pairs() { vec![] } else { dg }, split_list);
    }
    spec.ladder = get("ladder").map_or(Ok(default_ladder(&model, kind)), parse_ladder)?;
    spec.n_res = get("n_res").map(|v| parse_num("n_res", v)).transpose()?;
    spec.fit_order = get("fit_order").map(|v| parse_num("fit_order", v)).transpose()?;
    if let Some(v) = get("points") {
        spec.points = parse_num("points", v)?;
    }
    if let Some(v) = get("spectral_power") {
        spec.spectral_power = parse_num("spectral_power", v)?;
    }
    if let Some(v) = get("remainder_max_m") {
        spec.remainder_max_m = parse_num("remainder_max_m", v)?;
    }
    for key in Thresholds::KEYS {
        if let Some(v) = get(key) {
            spec.thresholds.set(key, parse_num(key, v)?);
        }
    }
    check_spec(&spec)?;
    Ok(RunConfig { spec, out_dir: get("out").map(PathBuf::from) })
}

/// Validates a spec, naming the offending field on failure.
pub fn check_spec(spec: &ExperimentSpec) -> Result<(), ConfigError> {
    let model = KahlerModel::new(spec.model).map_err(|e| match e {
        GeometryError::BadModulus { .. } => invalid("tau_im", e),
        e => invalid("epsilon", e),
    })?;
    for (field, list) in [("f", &spec.f), ("g", &spec.g)] {
        for expr in list {
            parse_observable(&model, expr).map_err(|e| invalid(field, e))?;
        }
    }
    for (key, value) in Thresholds::KEYS.iter().zip(threshold_values(&spec.thresholds)) {
        if !value.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
    }
    spec.validate().map(|_| ()).map_err(|e| match e {
        AsymptoticsError::TooFewSamples { .. } => invalid("ladder", e),
        AsymptoticsError::InvalidExperiment(ref msg) if msg.contains("ladder") => invalid("ladder", e),
        AsymptoticsError::InvalidExperiment(ref msg) if msg.contains("n_res") => invalid("n_res", e),
        AsymptoticsError::InvalidExperiment(ref msg) if msg.contains("points") => invalid("points", e),
        AsymptoticsError::InvalidExperiment(ref msg) if msg.contains("remainder_max_m") => {
            invalid("remainder_max_m", e)
        }
        AsymptoticsError::InvalidExperiment(ref msg) if msg.contains("partner") => invalid("g", e),
        e => invalid("f", e),
    })
}

fn threshold_values(t: &Thresholds) -> Vec<f64> {
    let json = serde_json::to_value(t).expect("thresholds serialize");
    Thresholds::KEYS.iter().map(|k| json[k].as_f64().unwrap_or(f64::NAN)).collect()
}
