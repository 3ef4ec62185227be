//! Access, search and cruising costs of a parking distribution, and the
//! distribution-free aggregates.

use serde::Serialize;

use crate::corridor::SpatialSolution;
use crate::error::{Error, Result};
use crate::quad;
use crate::scenario::{Scenario, VehicleClass};
use crate::search::{SearchModel, POLE_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub class: VehicleClass,
    /// Walking (HV) or self-driving (AV) cost from the space to the CBD.
    pub access: f64,
    pub search: f64,
    pub cruise: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(class: VehicleClass, access: f64, search: f64, cruise: f64) -> Self {
        CostBreakdown {
            class,
            access,
            search,
            cruise,
            total: access + search + cruise,
        }
    }
}

/// Keeps rounding noise from pushing a density past the search model's domain.
pub(crate) fn clamp_density(model: SearchModel, n: f64, m: f64) -> f64 {
    match model {
        SearchModel::Binomial => n.min(m * (1.0 - POLE_GUARD)),
        SearchModel::Piecewise(_) => n.min(m),
    }
}

fn cruise_from(scenario: &Scenario, class: VehicleClass, inner_mass: f64, total_mass: f64) -> f64 {
    match class {
        // Passes every parked HV on the way out, then the AVs parked closer in.
        VehicleClass::Av => {
            scenario.cruise_coeff(VehicleClass::Hv) * scenario.demand(VehicleClass::Hv)
                + scenario.cruise_coeff(VehicleClass::Av) * inner_mass
        }
        VehicleClass::Hv => scenario.cruise_coeff(VehicleClass::Hv) * (total_mass - inner_mass),
    }
}

pub fn cruising_cost(scenario: &Scenario, sol: &SpatialSolution, x: f64) -> Result<f64> {
    let (_, inner) = sol.sample(x)?;
    Ok(cruise_from(scenario, sol.class, inner, sol.mass()))
}

pub fn generalized_cost(scenario: &Scenario, sol: &SpatialSolution, x: f64) -> Result<CostBreakdown> {
    let (n, inner) = sol.sample(x)?;
    let class = sol.class;
    let m = scenario.capacity(class, x);
    let s = sol.search.search_time(clamp_density(sol.search, n, m), m)?;
    Ok(CostBreakdown::new(
        class,
        scenario.distance_cost(class) * x,
        scenario.search_value(class) * s,
        cruise_from(scenario, class, inner, sol.mass()),
    ))
}

/// `λx + γ(S + n ∂S/∂n)`; cruising is excluded because its total does not
/// depend on the distribution.
pub fn marginal_cost(scenario: &Scenario, sol: &SpatialSolution, x: f64) -> Result<f64> {
    Ok(marginal_cost_bounds(scenario, sol, x)?.0)
}

/// Subdifferential of the marginal cost; an interval only on the piecewise kink.
pub fn marginal_cost_bounds(scenario: &Scenario, sol: &SpatialSolution, x: f64) -> Result<(f64, f64)> {
    let (n, _) = sol.sample(x)?;
    let m = scenario.capacity(sol.class, x);
    marginal_at(scenario, sol.class, sol.search, x, n, m)
}

fn marginal_at(
    scenario: &Scenario,
    class: VehicleClass,
    model: SearchModel,
    x: f64,
    n: f64,
    m: f64,
) -> Result<(f64, f64)> {
    let (lo, hi) = model.marginal_factor_bounds(clamp_density(model, n, m), m)?;
    let access = scenario.distance_cost(class) * x;
    let gamma = scenario.search_value(class);
    Ok((access + gamma * lo, access + gamma * hi))
}

/// Cruising cost at every grid point.
pub fn cruising_profile(scenario: &Scenario, sol: &SpatialSolution) -> Vec<f64> {
    let cum = sol.cumulative();
    let total = *cum.last().unwrap_or(&0.0);
    cum.iter()
        .map(|&inner| cruise_from(scenario, sol.class, inner, total))
        .collect()
}

pub fn cost_profile(scenario: &Scenario, sol: &SpatialSolution) -> Result<Vec<CostBreakdown>> {
    let class = sol.class;
    let lambda = scenario.distance_cost(class);
    let gamma = scenario.search_value(class);
    let cruise = cruising_profile(scenario, sol);
    sol.xs
        .iter()
        .zip(&sol.density)
        .zip(&sol.capacity)
        .zip(cruise)
        .map(|(((&x, &n), &m), c)| {
            let s = sol.search.search_time(clamp_density(sol.search, n, m), m)?;
            Ok(CostBreakdown::new(class, lambda * x, gamma * s, c))
        })
        .collect()
}

/// Marginal-cost subdifferential `(lo, hi)` at every grid point.
pub fn marginal_profile(scenario: &Scenario, sol: &SpatialSolution) -> Result<Vec<(f64, f64)>> {
    sol.xs
        .iter()
        .zip(&sol.density)
        .zip(&sol.capacity)
        .map(|((&x, &n), &m)| marginal_at(scenario, sol.class, sol.search, x, n, m))
        .collect()
}

/// `∫ (λx + γS) n dx`, the class cost without cruising.
pub fn access_search_cost(scenario: &Scenario, sol: &SpatialSolution) -> Result<f64> {
    let costs = cost_profile(scenario, sol)?;
    let ys: Vec<f64> = costs
        .iter()
        .zip(&sol.density)
        .map(|(c, n)| (c.access + c.search) * n)
        .collect();
    Ok(quad::trapezoid(&sol.xs, &ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CruisingSplit {
    pub hv: f64,
    pub av: f64,
    pub total: f64,
}

impl CruisingSplit {
    pub fn get(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Av => self.av,
            VehicleClass::Hv => self.hv,
        }
    }
}

/// Total cruising cost, the same for every feasible distribution:
/// `½(β_c(1-ε²) + β_a ε²)N²`.
pub fn total_cruising_cost(scenario: &Scenario) -> CruisingSplit {
    let n_a = scenario.demand(VehicleClass::Av);
    let n_c = scenario.demand(VehicleClass::Hv);
    let beta_c = scenario.cruise_coeff(VehicleClass::Hv);
    let beta_a = scenario.cruise_coeff(VehicleClass::Av);
    let hv = 0.5 * beta_c * n_c * n_c;
    let av = beta_c * n_c * n_a + 0.5 * beta_a * n_a * n_a;
    CruisingSplit {
        hv,
        av,
        total: hv + av,
    }
}

/// The design-independent part of the priced total cost:
/// search at the critical occupancy plus total cruising.
pub fn planning_constant(scenario: &Scenario) -> Result<f64> {
    let p = scenario.piecewise().ok_or(Error::MissingPiecewise)?;
    let eps = scenario.penetration();
    let gamma = scenario.search_value(VehicleClass::Hv) * (1.0 - eps)
        + scenario.search_value(VehicleClass::Av) * eps;
    Ok(gamma * p.delta * p.kink() * scenario.total_demand() + total_cruising_cost(scenario).total)
}

/// `∫ c_i n_i dx` for an arbitrary density sampled on `xs`.
pub fn integrated_cruising_cost(scenario: &Scenario, class: VehicleClass, xs: &[f64], n: &[f64]) -> f64 {
    let cum = quad::cumulative_trapezoid(xs, n);
    let total = *cum.last().unwrap_or(&0.0);
    let ys: Vec<f64> = cum
        .iter()
        .zip(n)
        .map(|(&inner, &v)| cruise_from(scenario, class, inner, total) * v)
        .collect();
    quad::trapezoid(xs, &ys)
}
