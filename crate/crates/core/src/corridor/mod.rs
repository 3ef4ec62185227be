//! Per-class parking distributions along the corridor: the unpriced spatial
//! equilibrium and the cost-minimizing optimum.

mod closed_form;
mod shooting;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::scenario::{check_span, Scenario, VehicleClass};
use crate::search::SearchModel;

pub use closed_form::{closed_form_llp, table1_llp, Table1Values};
pub use shooting::{no_cruising_solution, solve, solve_equilibrium, solve_optimum, GRID_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Equilibrium,
    Optimum,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Equilibrium => "equilibrium",
            Mode::Optimum => "optimum",
        }
    }
}

/// Whether the piecewise closed form has a core parked at the critical
/// occupancy or only a tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SaturatedCore,
    Unsaturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "regime")]
pub enum Method {
    Shooting,
    ClosedForm(Regime),
    /// No demand for this class.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Shots fired while bracketing and bisecting the span.
    pub iterations: usize,
    /// `|∫n - N| / N` on the reported grid.
    pub mass_residual: f64,
    /// Largest deviation of the equalized cost from the level, relative to it.
    pub flatness: f64,
    /// Grid points sitting on the piecewise kink.
    pub kink_points: usize,
    /// Density touched zero strictly inside the span.
    pub interior_zero: bool,
}

/// Parking density of one class on `[0, span]`, with its common cost level
/// (equilibrium price or marginal cost).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSolution {
    pub class: VehicleClass,
    pub mode: Mode,
    pub search: SearchModel,
    pub method: Method,
    /// Increasing, from 0 to `span`.
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    /// Same-class spaces per km at each grid point.
    pub capacity: Vec<f64>,
    pub span: f64,
    pub level: f64,
    pub diagnostics: Diagnostics,
}

impl SpatialSolution {
    pub fn mass(&self) -> f64 {
        crate::quad::trapezoid(&self.xs, &self.density)
    }

    /// `∫₀^{x_j} n` at every grid point.
    pub fn cumulative(&self) -> Vec<f64> {
        crate::quad::cumulative_trapezoid(&self.xs, &self.density)
    }

    pub fn occupancy(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(&self.capacity)
            .map(|(n, m)| if *m > 0.0 { n / m } else { 0.0 })
            .collect()
    }

    /// Density and `∫₀^x n` at `x`, linear between grid points.
    pub fn sample(&self, x: f64) -> Result<(f64, f64)> {
        check_span(x, self.span)?;
        let x = x.clamp(0.0, self.span);
        let j = self.xs.partition_point(|&u| u <= x).saturating_sub(1);
        let cum = self.cumulative();
        if j + 1 >= self.xs.len() {
            return Ok((self.density[j], cum[j]));
        }
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        let n = self.density[j] + t * (self.density[j + 1] - self.density[j]);
        Ok((n, cum[j] + 0.5 * (x - x0) * (self.density[j] + n)))
    }

    pub fn require(&self, class: VehicleClass, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::WrongMode {
                expected: mode.name(),
            });
        }
        if self.class != class {
            return Err(Error::invalid("class", format!("expected an {class} solution")));
        }
        Ok(())
    }
}

/// Both classes solved in the same mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorSolution {
    pub av: SpatialSolution,
    pub hv: SpatialSolution,
}

impl CorridorSolution {
    pub fn get(&self, class: VehicleClass) -> &SpatialSolution {
        match class {
            VehicleClass::Av => &self.av,
            VehicleClass::Hv => &self.hv,
        }
    }
}

/// Solves AVs and HVs, concurrently when `exec` allows.
pub fn solve_both(scenario: &Scenario, mode: Mode, exec: Execution) -> Result<CorridorSolution> {
    let (av, hv) = par::join(
        exec,
        || solve(scenario, VehicleClass::Av, mode),
        || solve(scenario, VehicleClass::Hv, mode),
    );
    Ok(CorridorSolution { av: av?, hv: hv? })
}

/// Independent solves over a batch of scenarios, in input order.
pub fn solve_batch(
    scenarios: &[Scenario],
    mode: Mode,
    exec: Execution,
) -> Vec<Result<CorridorSolution>> {
    par::map(scenarios, exec, |s| solve_both(s, mode, Execution::Sequential))
}
