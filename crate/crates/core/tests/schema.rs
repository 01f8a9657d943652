use btq_core::asymptotics::{run_experiment, ExperimentKind, ExperimentSpec};
use btq_core::geometry::ModelKind;
use btq_core::report::REPORT_SCHEMA;
use btq_core::verify::verify;
use serde_json::Value;

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("schema is JSON");
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, instance: &Value, what: &str) {
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

fn small_spec(model: ModelKind, kind: ExperimentKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(model, kind);
    spec.ladder = match kind {
        ExperimentKind::Norms => vec![8, 10, 12, 14, 16, 20],
        ExperimentKind::Fspullback => vec![8, 12],
        _ => vec![8, 10, 12, 16],
    };
    spec.points = spec.points.min(8);
    spec.remainder_max_m = 10;
    spec
}

#[test]
fn every_experiment_kind_matches_schema() {
    let v = validator();
    for kind in ExperimentKind::ALL {
        let model = match kind {
            ExperimentKind::Umexpand | ExperimentKind::Fspullback => ModelKind::DeformedSphere { epsilon: 0.1 },
            ExperimentKind::Star | ExperimentKind::Dirac => ModelKind::Torus { tau_re: 0.0, tau_im: 1.0 },
            _ => ModelKind::RoundSphere,
        };
        let report = run_experiment(&small_spec(model, kind)).unwrap();
        assert_valid(&v, &serde_json::to_value(&report).unwrap(), kind.name());
    }
}

#[test]
fn verify_report_matches_schema() {
    let v = validator();
    let report = verify(&[1, 13]).unwrap();
    assert_valid(&v, &serde_json::to_value(&report).unwrap(), "verify");
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = validator();
    let report = run_experiment(&small_spec(ModelKind::RoundSphere, ExperimentKind::Trace)).unwrap();
    let good = serde_json::to_value(&report).unwrap();
    assert!(v.is_valid(&good));

    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("passed");
    assert!(!v.is_valid(&missing));

    let mut bad_kind = good.clone();
    bad_kind["spec"]["kind"] = Value::from("bogus");
    assert!(!v.is_valid(&bad_kind));

    let mut bad_relation = good.clone();
    bad_relation["checks"][0]["relation"] = Value::from("~");
    assert!(!v.is_valid(&bad_relation));

    let mut extra = good;
    extra["surprise"] = Value::from(1);
    assert!(!v.is_valid(&extra));
}
