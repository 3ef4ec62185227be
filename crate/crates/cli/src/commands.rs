use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use curbflow::corridor::{self, table1_llp, Mode};
use curbflow::planner::{self, Design};
use curbflow::{
    cost, load_scenario, output, presets, pricing, verify as checks, Error, Execution, Result, Scenario,
    SearchKind, VehicleClass,
};

use crate::manifest::{write_json, write_text, RunManifest};
use crate::{ModeArg, SearchArg, WhichArg};

/// Verification failures share the numeric exit code.
const CHECKS_FAILED: u8 = 2;

fn mode_of(arg: ModeArg) -> Mode {
    match arg {
        ModeArg::Equilibrium => Mode::Equilibrium,
        ModeArg::Optimum => Mode::Optimum,
    }
}

fn kind_of(arg: SearchArg) -> SearchKind {
    match arg {
        SearchArg::Binomial => SearchKind::Binomial,
        SearchArg::Piecewise => SearchKind::Piecewise,
    }
}

fn load(path: &Path) -> Result<Scenario> {
    let s = load_scenario(path)?;
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

fn level_keys(mode: Mode) -> (&'static str, &'static str) {
    match mode {
        Mode::Equilibrium => ("p_a", "p_c"),
        Mode::Optimum => ("MP_a", "MP_c"),
    }
}

pub fn solve(path: &Path, mode: ModeArg, search: Option<SearchArg>, out: &Path) -> Result<u8> {
    let started = Instant::now();
    let mut scenario = load(path)?;
    if let Some(kind) = search {
        scenario = scenario.with_search(kind_of(kind))?;
    }
    let mode = mode_of(mode);
    let sol = corridor::solve_both(&scenario, mode, Execution::Sequential)?;

    let mut classes = Map::new();
    for class in VehicleClass::ALL {
        let c = sol.get(class);
        classes.insert(
            class.to_string(),
            json!({
                "span": c.span,
                "level": c.level,
                "mass": c.mass(),
                "method": c.method,
                "diagnostics": c.diagnostics,
            }),
        );
    }
    let (key_a, key_c) = level_keys(mode);
    let tp = pricing::total_parking_cost(&scenario, &sol.av, &sol.hv)?;
    let summary = json!({
        "mode": mode.name(),
        "search": scenario.search().name(),
        key_a: sol.av.level,
        key_c: sol.hv.level,
        "total_parking_cost": tp,
        "total_cruising_cost": cost::total_cruising_cost(&scenario).total,
        "classes": classes,
    });

    let csv = out.join("solution.csv");
    let json_path = out.join("summary.json");
    write_text(&csv, &output::solution_csv(&scenario, &sol)?)?;
    write_json(&json_path, &summary)?;
    let mut manifest = RunManifest::new("solve", Some(path), Some(scenario.config()));
    manifest.outputs = vec![csv, json_path];
    manifest.write(&out.join("manifest.json"), started)?;
    println!("{key_c} = {:.6}, {key_a} = {:.6}", sol.hv.level, sol.av.level);
    Ok(0)
}

pub fn price(path: &Path, out: &Path) -> Result<u8> {
    let started = Instant::now();
    let scenario = load(path)?;
    let eq = corridor::solve_both(&scenario, Mode::Equilibrium, Execution::Sequential)?;
    let opt = corridor::solve_both(&scenario, Mode::Optimum, Execution::Sequential)?;
    let prices = pricing::optimal_prices(&scenario, &opt.av, &opt.hv)?;
    let cmp = pricing::compare(&scenario, &eq, &opt)?;
    let summary = json!({
        "TP_min": prices.tp_min,
        "TC": prices.tc,
        "net_revenue": prices.net_revenue,
        "TP_equilibrium": cmp.tp_equilibrium,
        "reduction": cmp.reduction,
        "MP_a": opt.av.level,
        "MP_c": opt.hv.level,
        "span_a": opt.av.span,
        "span_c": opt.hv.span,
    });

    let csv = out.join("prices.csv");
    let json_path = out.join("pricing.json");
    write_text(&csv, &output::pricing_csv(&prices))?;
    write_json(&json_path, &summary)?;
    let mut manifest = RunManifest::new("price", Some(path), Some(scenario.config()));
    manifest.outputs = vec![csv, json_path];
    manifest.write(&out.join("manifest.json"), started)?;
    println!("pricing lowers total parking cost by {:.2}%", 100.0 * cmp.reduction);
    Ok(0)
}

fn design_json(scenario: &Scenario, design: Design) -> Result<Value> {
    let eval = planner::tc_closed_form(scenario, design)?;
    let bounds = planner::reduction_bounds(scenario)?;
    Ok(json!({
        "which": design.kind,
        "theta": design.theta,
        "k": design.k,
        "TC": eval.tc,
        "NP": eval.np,
        "budget": eval.budget,
        "within_budget": eval.within_budget,
        "reduction": eval.reduction,
        "bounds": { "l52": bounds.l52, "l53": bounds.l53, "l54": bounds.l54 },
        "budget_saving": planner::budget_saving(scenario)?.fraction,
    }))
}

pub fn design(path: &Path, which: WhichArg) -> Result<u8> {
    let scenario = load(path)?;
    let design = match which {
        WhichArg::Benchmark => planner::benchmark_design(&scenario)?.design,
        WhichArg::FirstBest => planner::first_best(&scenario)?,
        WhichArg::SecondBest => planner::second_best(&scenario)?,
    };
    let text = serde_json::to_string_pretty(&design_json(&scenario, design)?)?;
    println!("{text}");
    Ok(0)
}

/// `start:end:count`, endpoints included.
pub fn parse_range(field: &'static str, text: &str) -> Result<Vec<f64>> {
    let bad = |reason: &str| Error::Invalid {
        field,
        reason: format!("`{text}`: {reason}"),
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad("expected start:end:count"));
    };
    let a: f64 = a.trim().parse().map_err(|_| bad("start is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| bad("end is not a number"))?;
    let n: usize = n.trim().parse().map_err(|_| bad("count is not a whole number"))?;
    match n {
        0 => Err(bad("count must be positive")),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn sweep(path: &Path, theta: &str, k: &str, out: &Path) -> Result<u8> {
    let started = Instant::now();
    let scenario = load(path)?;
    let thetas = parse_range("theta", theta)?;
    let ks = parse_range("k", k)?;
    let table = planner::sweep(&scenario, &thetas, &ks, Execution::Parallel)?;
    write_text(out, &output::sweep_csv(&table))?;
    let mut manifest = RunManifest::new("sweep", Some(path), Some(scenario.config()));
    manifest.outputs = vec![out.to_path_buf()];
    manifest.write(&sibling(out, ".manifest.json"), started)?;
    match table.argmin {
        Some((i, j)) => println!("cheapest affordable cell: theta = {}, k = {}", thetas[i], ks[j]),
        None => println!("no affordable cell"),
    }
    Ok(0)
}

pub fn verify(path: &Path, bins: usize, json_out: Option<&Path>) -> Result<u8> {
    let scenario = load(path)?;
    let report = checks::verify(&scenario, bins, Execution::Sequential)?;
    println!("{report}");
    if let Some(p) = json_out {
        write_json(p, &report)?;
    }
    Ok(if report.passed() { 0 } else { CHECKS_FAILED })
}

fn reference_scenarios() -> Vec<(&'static str, Scenario)> {
    vec![
        ("base_binomial_theta050", presets::base(SearchKind::Binomial, 0.5)),
        ("base_binomial_theta025", presets::base(SearchKind::Binomial, 0.25)),
        ("base_piecewise_theta050", presets::base(SearchKind::Piecewise, 0.5)),
        ("base_piecewise_theta025", presets::base(SearchKind::Piecewise, 0.25)),
        ("sigmoid_binomial", presets::sigmoid(SearchKind::Binomial)),
        ("sigmoid_piecewise", presets::sigmoid(SearchKind::Piecewise)),
    ]
}

fn reference_report() -> Result<Value> {
    let mut lower = Map::new();
    for (name, s) in reference_scenarios() {
        let eq = corridor::solve_both(&s, Mode::Equilibrium, Execution::Sequential)?;
        let opt = corridor::solve_both(&s, Mode::Optimum, Execution::Sequential)?;
        let cmp = pricing::compare(&s, &eq, &opt)?;
        let mut entry = json!({
            "p_a": eq.av.level,
            "p_c": eq.hv.level,
            "span_a_equilibrium": eq.av.span,
            "span_c_equilibrium": eq.hv.span,
            "MP_a": opt.av.level,
            "MP_c": opt.hv.level,
            "span_a_optimum": opt.av.span,
            "span_c_optimum": opt.hv.span,
            "TC_priced": pricing::priced_total_cost(&s, &opt.av, &opt.hv)?,
            "pricing_reduction": cmp.reduction,
            "NP": planner::profile_infrastructure_cost(&s)?,
        });
        if s.supply().is_constant() && s.search().name() == "piecewise" {
            let t = |c, m| table1_llp(&s, c, m).map(|v| json!({ "span": v.span, "level": v.level }));
            entry["tabulated"] = json!({
                "equilibrium_a": t(VehicleClass::Av, Mode::Equilibrium)?,
                "equilibrium_c": t(VehicleClass::Hv, Mode::Equilibrium)?,
                "optimum_a": t(VehicleClass::Av, Mode::Optimum)?,
                "optimum_c": t(VehicleClass::Hv, Mode::Optimum)?,
            });
        }
        lower.insert(name.to_string(), entry);
    }

    let base = presets::base(SearchKind::Binomial, 0.5);
    let bench = planner::benchmark_design(&base)?;
    let r = planner::reductions(&base)?;
    let bounds = planner::reduction_bounds(&base)?;
    let upper = json!({
        "benchmark": { "theta": bench.design.theta, "k": bench.design.k, "budget": bench.budget },
        "first_best": design_json(&base, planner::first_best(&base)?)?,
        "second_best": design_json(&base, planner::second_best(&base)?)?,
        "reductions": r,
        "budget_saving": planner::budget_saving(&base)?,
        "bounds": bounds,
        "total_cruising_cost": cost::total_cruising_cost(&base).total,
        "planning_constant": cost::planning_constant(&base)?,
    });
    Ok(json!({ "lower_level": lower, "planner": upper }))
}

fn print_flat(prefix: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                print_flat(&p, v);
            }
        }
        Value::Number(n) => match n.as_f64() {
            Some(x) => println!("{prefix} = {}", output::fmt_g(x)),
            None => println!("{prefix} = {n}"),
        },
        other => println!("{prefix} = {other}"),
    }
}

pub fn reference(out: Option<&Path>, scenarios: Option<&Path>) -> Result<u8> {
    let started = Instant::now();
    if let Some(dir) = scenarios {
        for (name, s) in reference_scenarios() {
            write_json(&dir.join(format!("{name}.json")), s.config())?;
        }
    }
    let report = reference_report()?;
    print_flat("", &report);
    if let Some(dir) = out {
        let path = dir.join("reference.json");
        write_json(&path, &report)?;
        let mut manifest = RunManifest::new("reference", None, None);
        manifest.outputs = vec![path];
        manifest.write(&dir.join("manifest.json"), started)?;
    }
    Ok(0)
}
