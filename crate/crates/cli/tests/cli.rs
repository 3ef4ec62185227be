use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curbflow"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn solve(out: &Path, mode: &str) -> Output {
    let s = scenario("base_binomial_theta050");
    run(&[
        "solve",
        "--scenario",
        s.to_str().unwrap(),
        "--mode",
        mode,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn solve_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve(dir.path(), "equilibrium");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["mode"], "equilibrium");
    let p_c = summary["p_c"].as_f64().unwrap();
    let p_a = summary["p_a"].as_f64().unwrap();
    assert!((p_c - 2.9443).abs() < 1e-3, "p_c = {p_c}");
    assert!((p_a - 1.8641).abs() < 1e-3, "p_a = {p_a}");

    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["parameters"]["N"], 20000.0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for mode in ["equilibrium", "optimum"] {
        assert_eq!(code(&solve(a.path(), mode)), 0);
        assert_eq!(code(&solve(b.path(), mode)), 0);
        for file in ["solution.csv", "summary.json"] {
            let x = std::fs::read(a.path().join(file)).unwrap();
            let y = std::fs::read(b.path().join(file)).unwrap();
            assert_eq!(x, y, "{mode}: {file} differs between runs");
        }
    }
}

#[test]
fn optimum_summary_reports_marginal_levels() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&solve(dir.path(), "optimum")), 0);
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary.get("MP_a").is_some());
    assert!(summary.get("p_a").is_none());
}

#[test]
fn price_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("base_binomial_theta050");
    let s = s.to_str().unwrap();
    let out = run(&["price", "--scenario", s, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let pricing = read_json(&dir.path().join("pricing.json"));
    let r = pricing["reduction"].as_f64().unwrap();
    assert!((r - 0.1276).abs() < 1e-3, "reduction = {r}");
    assert!(std::fs::read_to_string(dir.path().join("prices.csv")).unwrap().starts_with("x,tau_a,tau_c\n"));

    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--scenario",
        s,
        "--theta",
        "0.05:0.6:12",
        "--k",
        "20000:60000:9",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1 + 12 * 9);
    assert!(dir.path().join("sweep.csv.manifest.json").exists());
}

#[test]
fn design_prints_json() {
    let s = scenario("base_binomial_theta050");
    for (which, tc) in [("benchmark", 61100.0), ("first-best", 55473.65)] {
        let out = run(&["design", "--scenario", s.to_str().unwrap(), "--which", which]);
        assert_eq!(code(&out), 0);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!((v["TC"].as_f64().unwrap() - tc).abs() < 0.01, "{which}: {v}");
    }
}

#[test]
fn verify_exit_codes_track_resolution() {
    let s = scenario("base_piecewise_theta050");
    let s = s.to_str().unwrap();
    assert_eq!(code(&run(&["verify", "--scenario", s, "--bins", "400"])), 0);
    let coarse = run(&["verify", "--scenario", s, "--bins", "50"]);
    assert_eq!(code(&coarse), 2);
    assert!(String::from_utf8_lossy(&coarse.stdout).contains("FAIL"));
}

#[test]
fn bad_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["design", "--scenario", "/no/such/scenario.json", "--which", "benchmark"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    // Cruising so slow that the searching stock would swamp the HV arrival rate.
    let mut cfg = read_json(&scenario("base_binomial_theta050"));
    cfg["beta_c"] = Value::from(3e-4);
    let path = dir.path().join("slow.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = solve_with(&path, dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_c"));

    let bad_range = run(&[
        "sweep",
        "--scenario",
        scenario("base_binomial_theta050").to_str().unwrap(),
        "--theta",
        "0.1:0.5",
        "--k",
        "1:2:3",
        "--out",
        dir.path().join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&bad_range), 1);
}

#[test]
fn short_corridor_is_supply_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read_json(&scenario("base_binomial_theta050"));
    cfg["supply"]["x_hat"] = Value::from(0.05);
    let path = dir.path().join("short.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    assert_eq!(code(&solve_with(&path, dir.path())), 3);
}

fn solve_with(scenario: &Path, out: &Path) -> Output {
    run(&[
        "solve",
        "--scenario",
        scenario.to_str().unwrap(),
        "--mode",
        "equilibrium",
        "--out",
        out.join("run").to_str().unwrap(),
    ])
}
