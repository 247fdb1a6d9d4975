use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn investsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_investsim"))
        .args(args)
        .env_remove("INVESTSIM_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check_value(verdict: &Value, name: &str) -> f64 {
    verdict["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn reproduce_table1_reports_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = investsim(&[
        "reproduce",
        "table1",
        "--epsilon",
        "0.05",
        "--T",
        "500",
        "--runs",
        "4",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = json(&dir.path().join("verdict.json"));
    assert_eq!(v["passed"], true);
    assert!((check_value(&v, "optimal welfare") - 2.0).abs() < 1e-9);
    assert!((check_value(&v, "welfare after investing") - 1.05).abs() < 1e-9);
    assert!((check_value(&v, "threshold price of A") - 1.10).abs() < 1e-9);
    assert!((check_value(&v, "utility after investing") + 0.05).abs() < 1e-9);
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn reproduce_prop1_ratio_near_one_over_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = investsim(&[
        "reproduce",
        "prop1",
        "--arms",
        "4",
        "--T",
        "4000",
        "--runs",
        "20",
        "--out",
        out,
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let v = json(&dir.path().join("verdict.json"));
    let r = check_value(&v, "exp3 welfare ratio");
    assert!((0.23..=0.30).contains(&r));
}

#[test]
fn reproduce_random_scenarios() {
    for scenario in ["theorem3", "prop2"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let res = investsim(&[
            "reproduce",
            scenario,
            "--instances",
            "4",
            "--T",
            "300",
            "--runs",
            "5",
            "--out",
            out,
        ]);
        assert_eq!(code(&res), 0, "{scenario}: {}", String::from_utf8_lossy(&res.stdout));
        let report = json(&dir.path().join("report.json"));
        assert_eq!(report.as_array().unwrap().len(), 4);
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&investsim(&["reproduce", "table2"])), 2);
    assert_eq!(code(&investsim(&["reproduce", "table1", "--runs", "1"])), 2);
    assert_eq!(code(&investsim(&["frobnicate"])), 2);
    assert_eq!(code(&investsim(&["check-properties", "--algo", "nope"])), 2);
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "random", "algorithm": "smart_greedy", "learner": "exp3", "T": 400, "runs": 5, "beta": 0.5, "seed": 9}"#,
    );
    let mut csvs = vec![];
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let res = investsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        csvs.push(fs::read(out.join("trace.csv")).unwrap());
        assert_eq!(
            fs::read(out.join("report.json")).unwrap(),
            fs::read(dir.path().join("a/report.json")).unwrap()
        );
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert!(text.starts_with("t,state,arm,utility_raw,utility_norm,welfare_alg,welfare_opt,payment\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 401);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": "random", "T": 100, "runs": 1}"#);
    let run = |sub: &str, seed: Option<&str>| {
        let out = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_investsim"));
        cmd.args(["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        match seed {
            Some(s) => cmd.env("INVESTSIM_SEED", s),
            None => cmd.env_remove("INVESTSIM_SEED"),
        };
        assert!(cmd.status().unwrap().success());
        json(&out.join("summary.json"))
    };
    let a = run("a", Some("17"));
    let b = run("b", Some("17"));
    let c = run("c", None);
    assert_eq!(a, b);
    assert_ne!(a["instance_digest"], c["instance_digest"]);
}

#[test]
fn run_from_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_config(dir.path(), r#"{"scenario": "table1", "T": 50, "runs": 2}"#);
    let gen = dir.path().join("gen");
    assert_eq!(
        code(&investsim(&["run", "--config", &first, "--out", gen.to_str().unwrap()])),
        0
    );
    let cfg = write_config(
        dir.path(),
        r#"{"instance_file": "gen/instance.json", "learner": "fixed:0", "runs": 2}"#,
    );
    let out = dir.path().join("again");
    let res = investsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary = json(&out.join("summary.json"));
    assert!((summary["total_welfare_alg"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(summary["regret"].as_f64().unwrap(), 0.0);
}

#[test]
fn bad_configs_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("{\"scenario\": \"table1\",\n \"horizon\": 5}", "line 2"),
        ("{\"scenario\": \"table1\", \"T\": \"ten\"}", "line 1"),
        ("{\"scenario\": \"table1\", \"beta\": 1.5}", "beta"),
        ("{\"scenario\": \"nowhere\"}", "scenario"),
        ("{\"scenario\": \"table1\", \"learner\": \"ucb\"}", "learner"),
        ("{\"scenario\": \"table1\", \"T\": 0}", "`T`"),
    ];
    for (body, needle) in cases {
        let cfg = write_config(dir.path(), body);
        let res = investsim(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        let err = String::from_utf8_lossy(&res.stderr);
        assert_eq!(code(&res), 2, "{body}");
        assert!(err.contains(needle), "{body}: {err}");
    }
}

#[test]
fn failed_dynamic_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": "greedy_gap", "T": 100, "runs": 4, "beta": 1.0}"#,
    );
    let res = investsim(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&res), 1);
}

#[test]
fn property_checks() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    let res = investsim(&[
        "check-properties",
        "--algo",
        "smart_greedy",
        "--instances",
        "50",
        "--out",
        good.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    assert_eq!(json(&good.join("properties.json"))["passed"], true);
    assert!(!good.join("counterexamples.json").exists());

    let bad = dir.path().join("bad");
    let res = investsim(&[
        "check-properties",
        "--algo",
        "broken_greedy",
        "--instances",
        "50",
        "--out",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
    let cx = json(&bad.join("counterexamples.json"));
    assert!(!cx["weak_monotone"].as_array().unwrap().is_empty());
    assert!(!cx["xcone"].as_array().unwrap().is_empty());
}

#[test]
fn property_checks_from_template_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("templates.json");
    fs::write(
        &path,
        r#"[{"capacity": 1.0, "sizes": [0.55, 0.5, 0.5], "grid": [[0.5, 1.0, 1.1, 2.05], [1.0], [1.0]]}]"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let res = investsim(&[
        "check-properties",
        "--algo",
        "greedy",
        "--templates",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&out.join("properties.json"))["templates"], 1);
}
