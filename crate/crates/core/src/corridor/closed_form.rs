//! Analytic solutions for piecewise-linear search with constant supply, with
//! the steep branch treated as a hard cap at the critical occupancy.
//!
//! The density is a core parked at the cap on `[0, x₁]` followed by a tail
//! that falls to zero at the span edge. Writing `s = x̄ - x`, the lower-branch
//! ODE gives `n = λms/(γδ) · φ₁(±as)` at equilibrium (`a = mβ/(γδ)`, `+` for
//! AVs) and the linear `n = λms/(2γδ)` at the optimum.

use serde::Serialize;

use super::shooting::{empty, flatness};
use super::{Diagnostics, Method, Mode, Regime, SpatialSolution, GRID_STEPS};
use crate::error::{Error, Result};
use crate::quad;
use crate::scenario::{Scenario, SupplyProfile, VehicleClass};
use crate::search::{PiecewiseParams, SearchModel};

/// Span and level straight from the tabulated closed-form expressions,
/// which assume the cap binds (a saturated core of nonnegative length).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Values {
    pub span: f64,
    pub level: f64,
}

/// `(e^z - 1)/z`.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z)/z²`.
fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// `ln(1 + z)/z`.
fn log_ratio(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z / 2.0
    } else {
        z.ln_1p() / z
    }
}

struct Setup {
    p: PiecewiseParams,
    m: f64,
    lambda: f64,
    beta: f64,
    gamma: f64,
    demand: f64,
}

fn setup(scenario: &Scenario, class: VehicleClass) -> Result<Setup> {
    let SearchModel::Piecewise(p) = scenario.search() else {
        return Err(Error::ModelDomain(
            "closed forms need the piecewise search model".into(),
        ));
    };
    if !matches!(scenario.supply(), SupplyProfile::Constant { .. }) {
        return Err(Error::ModelDomain(
            "closed forms need a constant supply profile".into(),
        ));
    }
    let demand = scenario.demand(class);
    let m = scenario.capacity(class, 0.0);
    if m <= 0.0 && demand > 0.0 {
        return Err(Error::SupplyInfeasible {
            class,
            demand,
            max_mass: 0.0,
        });
    }
    Ok(Setup {
        p,
        m,
        lambda: scenario.distance_cost(class),
        beta: scenario.cruise_coeff(class),
        gamma: scenario.search_value(class),
        demand,
    })
}

// Validated scenarios keep z below 1 - omega; kept for hand-built inputs.
fn hv_domain(lambda: f64, z: f64) -> Result<()> {
    if z >= 1.0 {
        Err(Error::ModelDomain(format!(
            "HV equilibrium tail needs lambda_c = {lambda} > m_c beta_c (1 - omega) = {}",
            z * lambda
        )))
    } else {
        Ok(())
    }
}

fn level_for(scenario: &Scenario, class: VehicleClass, mode: Mode, span: f64) -> f64 {
    let mut level = scenario.distance_cost(class) * span;
    if mode == Mode::Equilibrium && class == VehicleClass::Av {
        level += scenario.cruise_coeff(VehicleClass::Hv) * scenario.demand(VehicleClass::Hv)
            + scenario.cruise_coeff(VehicleClass::Av) * scenario.demand(VehicleClass::Av);
    }
    level
}

/// The tabulated span and level expressions, evaluated as printed.
pub fn table1_llp(scenario: &Scenario, class: VehicleClass, mode: Mode) -> Result<Table1Values> {
    let Setup {
        p,
        m,
        lambda,
        beta,
        gamma,
        demand,
    } = setup(scenario, class)?;
    let (delta, c) = (p.delta, p.kink());
    let core = demand / (m * c);
    let span = match mode {
        Mode::Optimum => core + gamma * delta * c / lambda,
        Mode::Equilibrium if beta == 0.0 => core + gamma * delta * c / (2.0 * lambda),
        Mode::Equilibrium => {
            let g = gamma * delta;
            let mb = m * beta;
            match class {
                VehicleClass::Av => {
                    core - g / mb - g * (lambda + mb * c) / (mb * mb * c) * (lambda / (lambda + mb * c)).ln()
                }
                VehicleClass::Hv => {
                    hv_domain(lambda, mb * c / lambda)?;
                    core + g / mb - g * (lambda - mb * c) / (mb * mb * c) * (lambda / (lambda - mb * c)).ln()
                }
            }
        }
    };
    Ok(Table1Values {
        span,
        level: level_for(scenario, class, mode, span),
    })
}

/// Exact capped solution. Uses the tabulated saturated-core shape when the
/// core length is nonnegative and a pure tail otherwise.
pub fn closed_form_llp(scenario: &Scenario, class: VehicleClass, mode: Mode) -> Result<SpatialSolution> {
    let s = setup(scenario, class)?;
    if s.demand <= 0.0 {
        let mut sol = empty(scenario, class, mode);
        sol.method = Method::ClosedForm(Regime::Unsaturated);
        return Ok(sol);
    }
    let (delta, c, m) = (s.p.delta, s.p.kink(), s.m);
    let scale = s.lambda * m / (s.gamma * delta);
    let a = m * s.beta / (s.gamma * delta);
    let z = m * s.beta * c / s.lambda;
    let base = s.gamma * delta * c / s.lambda;

    // Tail length to the cap, tail density at distance `s` from the edge,
    // and tail mass out to distance `X`.
    let (tail_len, density, mass): (f64, Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) =
        match (mode, class) {
            (Mode::Optimum, _) => (
                2.0 * base,
                Box::new(move |t| 0.5 * scale * t),
                Box::new(move |t| 0.25 * scale * t * t),
            ),
            (Mode::Equilibrium, VehicleClass::Av) => (
                base * log_ratio(z),
                Box::new(move |t| scale * t * phi1(a * t)),
                Box::new(move |t| scale * t * t * phi2(a * t)),
            ),
            (Mode::Equilibrium, VehicleClass::Hv) => {
                hv_domain(s.lambda, z)?;
                (
                    base * log_ratio(-z),
                    Box::new(move |t| scale * t * phi1(-a * t)),
                    Box::new(move |t| scale * t * t * phi2(-a * t)),
                )
            }
        };

    let full_tail = mass(tail_len);
    let (core, tail, regime) = if full_tail <= s.demand {
        ((s.demand - full_tail) / (m * c), tail_len, Regime::SaturatedCore)
    } else {
        let (mut lo, mut hi) = (0.0, tail_len);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < s.demand {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * tail_len {
                break;
            }
        }
        (0.0, 0.5 * (lo + hi), Regime::Unsaturated)
    };
    let span = core + tail;

    let x_hat = scenario.supply_span();
    if span > x_hat {
        let max_mass = if x_hat >= tail_len {
            full_tail + (x_hat - tail_len) * m * c
        } else {
            mass(x_hat)
        };
        return Err(Error::SupplyInfeasible {
            class,
            demand: s.demand,
            max_mass,
        });
    }

    let mut xs = quad::linspace(0.0, span, GRID_STEPS + 1);
    if core > 0.0 {
        let j = xs.partition_point(|&x| x < core);
        if xs[j] != core {
            xs.insert(j, core);
        }
    }
    let density: Vec<f64> = xs
        .iter()
        .map(|&x| if core > 0.0 && x <= core { c * m } else { density(span - x).min(c * m) })
        .collect();
    let kink_points = xs.iter().filter(|&&x| x <= core && core > 0.0).count();
    let capacity = vec![m; xs.len()];
    let mut sol = SpatialSolution {
        class,
        mode,
        search: scenario.search(),
        method: Method::ClosedForm(regime),
        xs,
        density,
        capacity,
        span,
        level: level_for(scenario, class, mode, span),
        diagnostics: Diagnostics::default(),
    };
    sol.diagnostics = Diagnostics {
        iterations: 0,
        mass_residual: (sol.mass() - s.demand).abs() / s.demand,
        flatness: flatness(scenario, &sol, true)?,
        kink_points,
        interior_zero: false,
    };
    Ok(sol)
}
