//! Plot-ready CSV tables. Numbers are written with 12 significant digits in
//! `%g` style so repeated runs diff cleanly.

use std::fmt::Write as _;

use crate::corridor::{CorridorSolution, SpatialSolution};
use crate::cost::{self, CostBreakdown};
use crate::error::Result;
use crate::planner::SweepTable;
use crate::pricing::PricingSchedule;
use crate::scenario::{Scenario, VehicleClass};

const SIGNIFICANT: usize = 12;

/// `%.12g`: fixed notation for moderate exponents, scientific otherwise,
/// trailing zeros removed.
pub fn fmt_g(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (SIGNIFICANT as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn union_grid<'a>(grids: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut xs: Vec<f64> = grids.into_iter().flatten().copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Costs at any `x`; past the span nobody parks and only the distance grows.
fn costs_at(scenario: &Scenario, sol: &SpatialSolution, x: f64) -> Result<(f64, CostBreakdown)> {
    if x <= sol.span {
        let (n, _) = sol.sample(x)?;
        return Ok((n, cost::generalized_cost(scenario, sol, x)?));
    }
    let edge = cost::generalized_cost(scenario, sol, sol.span)?;
    let access = scenario.distance_cost(sol.class) * x;
    Ok((0.0, CostBreakdown::new(sol.class, access, edge.search, edge.cruise)))
}

/// `x,n_a,n_c,S_a,S_c,c_a,c_c,P_a,P_c` on the union of both solver grids.
/// `S` is in search-time units, the other cost columns in money.
pub fn solution_csv(scenario: &Scenario, sol: &CorridorSolution) -> Result<String> {
    let mut out = String::from("x,n_a,n_c,S_a,S_c,c_a,c_c,P_a,P_c\n");
    let gamma_a = scenario.search_value(VehicleClass::Av);
    let gamma_c = scenario.search_value(VehicleClass::Hv);
    for x in union_grid([sol.av.xs.as_slice(), sol.hv.xs.as_slice()]) {
        let (na, a) = costs_at(scenario, &sol.av, x)?;
        let (nc, c) = costs_at(scenario, &sol.hv, x)?;
        let row = [
            x,
            na,
            nc,
            a.search / gamma_a,
            c.search / gamma_c,
            a.cruise,
            c.cruise,
            a.total,
            c.total,
        ];
        push_row(&mut out, &row);
    }
    Ok(out)
}

/// `x,tau_a,tau_c`; each price is zero beyond its own span.
pub fn pricing_csv(prices: &PricingSchedule) -> String {
    let mut out = String::from("x,tau_a,tau_c\n");
    for x in union_grid([prices.av.xs.as_slice(), prices.hv.xs.as_slice()]) {
        push_row(&mut out, &[x, prices.av.at(x), prices.hv.at(x)]);
    }
    out
}

/// `theta,k,TC,NP,feasible,reduction`, θ-major.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("theta,k,TC,NP,feasible,reduction\n");
    for cell in &table.cells {
        let d = cell.design;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_g(d.theta),
            fmt_g(d.k),
            fmt_g(cell.tc),
            fmt_g(cell.np),
            u8::from(cell.feasible),
            fmt_g(cell.reduction)
        );
    }
    out
}

fn push_row(out: &mut String, row: &[f64]) {
    let cells: Vec<String> = row.iter().map(|&v| fmt_g(v)).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}
