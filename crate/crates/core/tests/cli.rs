use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deconv-gof"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mod1_h0_n500.txt")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fixture_is_not_rejected() {
    let out = run(&["test", fixture().to_str().unwrap()]);
    let doc = json(&out);
    assert_eq!(doc["result"]["reject"], Value::Bool(false));
    assert_eq!(doc["result"]["n"], 500);
    assert_eq!(doc["config"]["test"]["calibration"], "mc");
    assert_eq!(doc["coefficients"]["origin"], "computed");
}

#[test]
fn unparsable_line_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "1.0\n2.0\nabc\n").unwrap();
    let out = run(&["test", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&path, "1.0\n-2.0\n").unwrap();
    let out = run(&["test", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn larger_alpha_lowers_the_critical_value() {
    let f = fixture();
    let crit = |alpha: &str| {
        let doc = json(&run(&["test", f.to_str().unwrap(), "--calibration", "asymptotic", "--alpha", alpha]));
        doc["result"]["critical_value"].as_f64().unwrap()
    };
    let (low, high) = (crit("0.5"), crit("0.05"));
    assert!(low < high);
    assert!((high - 3.8415).abs() < 1e-4);
}

#[test]
fn coefficient_document_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json(&run(&["coeffs", "--k", "6"]));
    let k = doc["coefficients"]["k"].as_u64().unwrap() as usize;
    assert_eq!(k, 6);
    let sigma: Vec<f64> = serde_json::from_value(doc["coefficients"]["sigma"].clone()).unwrap();
    for i in 0..k {
        assert!(sigma[i * k + i] > 0.0);
        for j in 0..k {
            assert_eq!(sigma[i * k + j], sigma[j * k + i]);
        }
    }
    assert!(doc["coefficients"]["min_eigen"].as_f64().unwrap() >= 0.0);
    assert_eq!(run(&["coeffs", "--k", "0"]).status.code(), Some(2));

    let cache = dir.path().join("coeffs.json");
    let out = run(&["coeffs", "--out", cache.to_str().unwrap()]);
    assert!(out.status.success());
    let f = fixture();
    let fresh = json(&run(&["test", f.to_str().unwrap()]));
    let cached = json(&run(&["test", f.to_str().unwrap(), "--coeffs-cache", cache.to_str().unwrap()]));
    assert_eq!(fresh["result"], cached["result"]);
    assert_eq!(cached["coefficients"]["origin"], cache.to_str().unwrap());

    let config = dir.path().join("other.toml");
    fs::write(&config, "[null]\nu_split = 0.25\n").unwrap();
    let out = run(&[
        "test",
        f.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--coeffs-cache",
        cache.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale"));
}

#[test]
fn simulate_writes_csv_and_json_twin() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("table.csv");
    let out = run(&[
        "simulate",
        "--scenarios",
        "Mod1",
        "--reps",
        "50",
        "--calibration",
        "asymptotic",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scenario,n,reps,reject_rate,ci_low,ci_high,seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("Mod1,50,50,"));
    assert!(lines[1].ends_with(",NA"));
    assert!(!csv.contains('\r'));
    let twin: Value = serde_json::from_str(&fs::read_to_string(out_path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(twin["rows"].as_array().unwrap().len(), 3);
    assert_eq!(twin["config"]["sim"]["reps"], 50);
}

#[test]
fn configuration_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[test]\nalpah = 0.1\n").unwrap();
    let f = fixture();
    let out = run(&["test", f.to_str().unwrap(), "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["simulate", "--scenarios", "Alt9"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn discrete_config_generate_and_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mod2.toml");
    fs::write(
        &config,
        r#"
[null]
y = { kind = "poisson", mean = 1.0 }
z = { kind = "geometric", mean = 1.0 }
reference = { kind = "geometric", p = 0.5 }
max_degree = 10

[test]
calibration = "mc"
reps = 200
seed = 3
"#,
    )
    .unwrap();
    let data = dir.path().join("mod2.txt");
    let out = run(&["generate", "--scenario", "Mod2", "--n", "100", "--seed", "4", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    let doc = json(&run(&["test", data.to_str().unwrap(), "--config", config.to_str().unwrap()]));
    assert_eq!(doc["result"]["n"], 100);
    assert_eq!(doc["config"]["null"]["reference"]["p"], 0.5);

    let cal = json(&run(&["calibrate", "--n", "100", "--config", config.to_str().unwrap()]));
    assert_eq!(cal["critical_value"], doc["result"]["critical_value"]);

    // non-integer observations are outside the geometric support
    fs::write(&data, "0\n1.5\n2\n").unwrap();
    let out = run(&["test", data.to_str().unwrap(), "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
