use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn btq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btq")).args(args).output().expect("spawn btq")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const NORMS_X3: &str = "model = round_sphere\nexperiment = norms\nf = x3\n";

#[test]
fn list_models() {
    let o = btq(&["list-models"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for name in ["round_sphere", "deformed_sphere", "torus"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn list_observables() {
    let o = btq(&["list-observables", "torus"]);
    assert_eq!(code(&o), 0);
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert!(names.iter().any(|n| n == "f_1_0") && names.iter().any(|n| n == "f_m1_0"));
    assert_eq!(names.len(), 50);
    let o = btq(&["list-observables", "round_sphere"]);
    assert!(stdout(&o).lines().any(|n| n == "x3"));
    let o = btq(&["list-observables", "klein_bottle"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("error: cli:"));
}

#[test]
fn run_norms_writes_csv_and_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "norms_x3.cfg", NORMS_X3);
    let out = tmp.path().join("out");
    let o = btq(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next(), Some("m,raw,fitted,residual,threshold,pass,series"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 7);
    for row in &rows {
        let m: f64 = row[0].parse().unwrap();
        let raw: f64 = row[1].parse().unwrap();
        // ‖T_x3‖ = m/(m+2)
        assert!((raw - m / (m + 2.0)).abs() < 1e-12);
        assert_eq!(row[5], "true");
        assert_eq!(row[6], "norm[x3]");
    }
    let fits = fs::read_to_string(out.join("fits.csv")).unwrap();
    assert!(fits.starts_with("series,form,order,term,coefficient,residual,rate,condition\n"));
    let c0: f64 = fits.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((c0 - 1.0).abs() < 1e-3);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["spec"]["ladder"].as_array().unwrap().len(), 7);
}

#[test]
fn threshold_failure_exits_two_and_still_writes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "strict.cfg",
        "model = round_sphere\nexperiment = dirac\nf = x1\ng = x2\n[thresholds]\nrate_min = 1.5\n",
    );
    let out = tmp.path().join("out");
    let o = btq(&["run", &cfg, "--out", out.to_str().unwrap(), "--ladder", "8,12,16,24"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(out.join("report.json").exists() && out.join("samples.csv").exists());
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn overrides_apply() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n.cfg", &format!("{NORMS_X3}out = {}\n", tmp.path().join("cfg_out").display()));
    let out = tmp.path().join("flag_out");
    let o = btq(&[
        "--jobs",
        "2",
        "run",
        &cfg,
        "--ladder",
        "8,10,12,14,16,20",
        "--nres",
        "48",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!tmp.path().join("cfg_out").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["spec"]["ladder"], serde_json::json!([8, 10, 12, 14, 16, 20]));
    assert_eq!(report["spec"]["n_res"], 48);
    assert_eq!(report["levels"][0]["audit"]["n_res"], 48);
}

#[test]
fn config_out_used_without_flag() {
    let tmp = TempDir::new().unwrap();
    let dest = tmp.path().join("from_cfg");
    let cfg = write_config(tmp.path(), "n.cfg", &format!("{NORMS_X3}out = {}\n", dest.display()));
    let o = btq(&["run", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dest.join("report.json").exists());
}

#[test]
fn errors_exit_one_with_module() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.cfg");
    let o = btq(&["run", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error: io:"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "bad.cfg", "model = round_sphere\nexperiment = bogus\n");
    let o = btq(&["run", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error: config:"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "eps.cfg", "model = deformed_sphere\nepsilon = 0.5\nexperiment = norms\n");
    let o = btq(&["run", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("positivity"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "n.cfg", NORMS_X3);
    let o = btq(&["run", &cfg, "--ladder", "8,x"]);
    assert_eq!(code(&o), 1);
    let o = btq(&["--jobs", "0", "list-models"]);
    assert_eq!(code(&o), 1);
    let o = btq(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error: cli:"), "{}", stderr(&o));
}

#[test]
fn seedless_is_a_bare_flag() {
    assert_eq!(code(&btq(&["--seedless", "list-models"])), 0);
    assert_eq!(code(&btq(&["list-models", "--seedless"])), 0);
    let o = btq(&["--seedless=1", "list-models"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("seedless"));
}

#[test]
fn report_renders_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n.cfg", NORMS_X3);
    let out = tmp.path().join("out");
    assert_eq!(code(&btq(&["run", &cfg, "--out", out.to_str().unwrap()])), 0);
    let o = btq(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("experiment norms on round_sphere") && text.contains("norm_limit[x3]"), "{text}");
    let o = btq(&["report", tmp.path().join("empty").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).starts_with("error: report:"), "{}", stderr(&o));
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "d.cfg", "model = torus\nexperiment = dirac\nladder = 8,12,16,24\n");
    let read = |d: &str| {
        let out = tmp.path().join(d);
        assert_eq!(code(&btq(&["run", &cfg, "--out", out.to_str().unwrap()])), 0);
        let mut json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        json.as_object_mut().unwrap().remove("timing");
        (json.to_string(), fs::read(out.join("samples.csv")).unwrap(), fs::read(out.join("fits.csv")).unwrap())
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn verify_subset() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let o = btq(&["verify", "--criteria", "1,13", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("criterion  1  PASS") && text.contains("criterion 13  PASS"), "{text}");
    assert!(out.join("verify.json").exists());
    let o = btq(&["report", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("2/2 criteria passed"));
    let o = btq(&["verify", "--criteria", "3"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&btq(&["verify", "--criteria", "16"])), 1);
    assert_eq!(code(&btq(&["verify", "--criteria", "99"])), 1);
}
