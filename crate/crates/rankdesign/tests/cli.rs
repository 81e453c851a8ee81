use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> String {
    format!("{}/configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rankdesign-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankdesign"))
        .args(args)
        .env_remove("RANKDESIGN_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn floats(text: &str, name: &str) -> Vec<f64> {
    csv_column(text, name).iter().map(|s| s.parse().unwrap()).collect()
}

const FIG3_POPULATION: &str = r#""population": {
    "f": {"family": "power", "scale": 2.0, "exponent": 1.0},
    "g": {"family": "power", "scale": 1.0, "exponent": 0.5},
    "p": {"family": "power", "scale": 1.0, "exponent": 2.0}
}"#;

#[test]
fn eval_reports_baseline_welfare() {
    let o = run(&["--config", &config("baseline"), "eval"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["private_utility"].as_f64().unwrap() - 0.32).abs() < 1e-9);
    assert!((v["applicant_welfare"].as_f64().unwrap() - 0.0698667).abs() < 1e-6);
}

#[test]
fn eval_pure_randomization() {
    let o = run(&["--config", &config("pure_randomization"), "eval"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["applicant_welfare"].as_f64(), Some(0.2));
}

#[test]
fn malformed_config_names_the_field() {
    let path = temp_file(
        "missing_p.json",
        r#"{"population": {"f": {"family": "power", "scale": 2.0, "exponent": 1.0},
                           "g": {"family": "power", "scale": 1.0, "exponent": 0.5}},
            "policy": {"two_level": {"c": 0.8, "capacity": 0.2}}}"#,
    );
    let o = run(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`p`"), "{err}");

    let path = temp_file("syntax.json", "{ not json");
    assert_eq!(run(&["--config", path.to_str().unwrap(), "eval"]).status.code(), Some(2));
    assert_eq!(run(&["--config", "/nonexistent/cfg.json", "eval"]).status.code(), Some(2));
}

#[test]
fn invalid_policy_is_a_validation_error() {
    let path = temp_file(
        "bad_policy.json",
        &format!(r#"{{{FIG3_POPULATION}, "policy": {{"two_level": {{"c": 0.9, "capacity": 0.2}}}}}}"#),
    );
    let o = run(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity"));
}

#[test]
fn model_error_exits_with_numerical_code() {
    // A bounded piecewise transfer cannot reach the entry score.
    let path = temp_file(
        "model.json",
        r#"{"population": {
              "f": {"family": "power", "scale": 2.0, "exponent": 1.0},
              "g": {"family": "piecewise_monotone", "knots": [[0.0, 0.0], [0.05, 0.05]]},
              "p": {"family": "power", "scale": 1.0, "exponent": 2.0}},
            "policy": {"two_level": {"c": 0.8, "capacity": 0.2}}}"#,
    );
    let o = run(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_reproduces_tradeoff_shapes() {
    let o = run(&["--config", &config("baseline"), "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("c,level1,applicant_welfare,societal_utility,private_utility,error"));
    let c = floats(&text, "c");
    let w = floats(&text, "applicant_welfare");
    let soc = floats(&text, "societal_utility");
    let pri = floats(&text, "private_utility");
    assert_eq!(c.len(), 100);
    assert!(c.windows(2).all(|p| p[1] > p[0]));
    assert!(w.windows(2).all(|p| p[1] <= p[0] + 1e-9));
    assert!(pri.windows(2).all(|p| p[1] >= p[0] - 1e-9));
    let best = (0..soc.len()).max_by(|&a, &b| soc[a].total_cmp(&soc[b])).unwrap();
    assert!((c[best] - 4.0 / 7.0).abs() < 0.01);
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let a = run(&["--config", &config("baseline"), "--workers", "1", "sweep"]);
    let b = run(&["--config", &config("baseline"), "--workers", "4", "sweep"]);
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_rankdesign"))
        .args(["--config", &config("baseline"), "sweep"])
        .env("RANKDESIGN_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(run(&["--config", &config("baseline"), "--workers", "0", "sweep"]).status.code(), Some(2));
}

#[test]
fn short_and_partly_invalid_sweeps() {
    let path = temp_file(
        "sweep2.json",
        &format!(r#"{{{FIG3_POPULATION}, "sweep": {{"start": 0.2, "end": 0.7, "steps": 2, "capacity": 0.2}}}}"#),
    );
    let o = run(&["--config", path.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(floats(&stdout(&o), "c"), vec![0.2, 0.7]);

    let path = temp_file(
        "sweep_over.json",
        &format!(r#"{{{FIG3_POPULATION}, "sweep": {{"start": 0.6, "end": 0.9, "steps": 4, "capacity": 0.2}}}}"#),
    );
    let o = run(&["--config", path.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let errors = csv_column(&text, "error");
    // 0.6, 0.7 and 0.8 = 1 − ρ are feasible; 0.9 is not.
    assert_eq!(errors.iter().filter(|e| e.is_empty()).count(), 3);
    assert!(errors[3].contains("capacity"), "{text}");

    let path = temp_file(
        "sweep_all_bad.json",
        &format!(r#"{{{FIG3_POPULATION}, "sweep": {{"start": 0.85, "end": 0.9, "steps": 2, "capacity": 0.2}}}}"#),
    );
    assert_eq!(run(&["--config", path.to_str().unwrap(), "sweep"]).status.code(), Some(2));
}

#[test]
fn equilibrium_schedule_structure() {
    let o = run(&["--config", &config("four_level"), "equilibrium"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("theta,band,effort,score"));
    let theta = floats(&text, "theta");
    let band = floats(&text, "band");
    let effort = floats(&text, "effort");
    let score = floats(&text, "score");
    assert!(score.windows(2).all(|p| p[1] >= p[0] - 1e-12));
    let mut jumps = 0;
    for i in 1..theta.len() {
        if band[i] != band[i - 1] {
            assert!(effort[i] > effort[i - 1], "no jump at {}", theta[i]);
            jumps += 1;
        } else if band[i] > 0.0 {
            assert!(effort[i] < effort[i - 1]);
        }
    }
    assert_eq!(jumps, 3);

    let o = run(&["--config", &config("four_level"), "--grid", "2", "equilibrium"]);
    assert_eq!(floats(&stdout(&o), "theta"), vec![0.0, 0.4, 0.6, 0.8, 1.0]);

    let o = run(&["--config", &config("pure_randomization"), "equilibrium"]);
    let text = stdout(&o);
    assert!(floats(&text, "effort").iter().all(|&e| e == 0.0));
    assert!(floats(&text, "band").iter().all(|&b| b == 0.0));
}

#[test]
fn groups_audit() {
    let o = run(&["--config", &config("groups"), "groups"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("c,tau_a,tau_b,access,gap_at_q25,gap_at_q50,gap_at_q75"));
    let access = floats(&text, "access");
    assert_eq!(access.len(), 7);
    assert!(access.windows(2).all(|p| p[1] <= p[0] + 1e-12));

    let path = temp_file(
        "groups_single.json",
        r#"{"population": {
              "f": {"family": "power", "scale": 1.0, "exponent": 1.0},
              "g": {"family": "power", "scale": 1.0, "exponent": 0.5},
              "p": {"family": "power", "scale": 1.0, "exponent": 2.0}},
            "groups": {"gamma_a": 2.0, "gamma_b": 1.0},
            "policy": {"two_level": {"c": 0.3, "capacity": 0.2}}}"#,
    );
    let o = run(&["--config", path.to_str().unwrap(), "--format", "json", "groups"]);
    let v = json(&o);
    assert!((v["audit"][0]["access"].as_f64().unwrap() - 0.171429).abs() < 1e-6);
    assert_eq!(v["regions"].as_array().unwrap().len(), 3);

    let path = temp_file(
        "groups_equal.json",
        r#"{"population": {
              "f": {"family": "power", "scale": 1.0, "exponent": 1.0},
              "g": {"family": "power", "scale": 1.0, "exponent": 0.5},
              "p": {"family": "power", "scale": 1.0, "exponent": 2.0}},
            "groups": {"gamma_a": 1.5, "gamma_b": 1.5},
            "sweep": {"start": 0.1, "end": 0.7, "steps": 5, "capacity": 0.2}}"#,
    );
    let text = stdout(&run(&["--config", path.to_str().unwrap(), "groups"]));
    for col in ["gap_at_q25", "gap_at_q50", "gap_at_q75"] {
        assert!(floats(&text, col).iter().all(|g| g.abs() < 1e-9), "{col}: {text}");
    }

    assert_eq!(run(&["--config", &config("baseline"), "groups"]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let o = run(&["--config", &config("baseline"), "verify"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["certified"], Value::Bool(true));
    assert!(v["per_band_max_gain"].as_array().unwrap().len() == 2);

    let o = run(&["--config", &config("baseline"), "verify", "--rule", "resort"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("worst gain"));

    let o = run(&["--config", &config("baseline"), "verify", "--epsilon", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["worst_gain"].as_f64(), Some(0.0));

    let o = run(&["--config", &config("baseline"), "verify", "--agents", "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn optimize_objectives() {
    let o = run(&["--config", &config("baseline"), "optimize", "--objective", "societal"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((json(&o)["c"].as_f64().unwrap() - 4.0 / 7.0).abs() < 1e-4);

    let o = run(&["--config", &config("baseline"), "optimize", "--objective", "private"]);
    assert!((json(&o)["c"].as_f64().unwrap() - 0.8).abs() < 1e-9);

    let o = run(&["--config", &config("baseline"), "optimize", "--objective", "welfare"]);
    assert!(json(&o)["c"].as_f64().unwrap() < 1e-6);

    let o = run(&["--config", &config("three_level"), "optimize"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["improvement"].as_f64().unwrap() > 1e-6);
    assert_eq!(v["policy"]["levels"].as_array().unwrap().len(), 3);
}

#[test]
fn multidim_command() {
    let o = run(&["--config", &config("multidim"), "multidim"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let beta = v["interior_weight"]["beta"].as_f64().unwrap();
    assert!(beta > 0.0 && beta < 1.0);
    assert!(v["interior_weight"]["weighted_utility_slope"].as_f64().unwrap().abs() < 1e-4);
    assert_eq!(v["rank_preservation"]["violations"].as_u64(), Some(0));

    let o = run(&["--config", &config("multidim"), "--format", "csv", "multidim", "--agents", "50"]);
    let text = stdout(&o);
    assert!(text.starts_with("agent,v_pre,reward_band,violation_flag"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn output_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("rankdesign-out-{}.json", std::process::id()));
    let o = run(&["--config", &config("baseline"), "--output", path.to_str().unwrap(), "eval"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["private_utility"].is_number());
    std::fs::remove_file(path).unwrap();
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["eval"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
