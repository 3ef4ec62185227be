//! Boundary-value shooting: integrate the cost-equalization ODE backward from
//! an empty span edge and bisect on the edge until the parked mass matches
//! demand.

use super::{Diagnostics, Method, Mode, SpatialSolution};
use crate::cost;
use crate::error::{Error, Result};
use crate::quad;
use crate::scenario::{check_supply_sufficiency, Scenario, VehicleClass};
use crate::search::{Branch, SearchModel, POLE_GUARD};

/// RK4 steps across the span.
pub const GRID_STEPS: usize = 2000;
/// Binomial occupancy above which steps are halved.
const POLE_ZONE: f64 = 0.999;
const MAX_SHOTS: usize = 200;
/// Bisection stops once the shot mass is this close to demand.
const MASS_RTOL: f64 = 1e-11;
/// A collapsed bracket is still accepted within this mass error.
const MASS_ACCEPT: f64 = 1e-4;
const SPAN_RTOL: f64 = 1e-14;
/// Outermost grid points averaged for the equilibrium price.
const LEVEL_POINTS: usize = 10;

pub fn solve_equilibrium(scenario: &Scenario, class: VehicleClass) -> Result<SpatialSolution> {
    solve(scenario, class, Mode::Equilibrium)
}

pub fn solve_optimum(scenario: &Scenario, class: VehicleClass) -> Result<SpatialSolution> {
    solve(scenario, class, Mode::Optimum)
}

/// The same solve with both cruising coefficients set to zero.
pub fn no_cruising_solution(
    scenario: &Scenario,
    class: VehicleClass,
    mode: Mode,
) -> Result<SpatialSolution> {
    solve(&scenario.without_cruising(), class, mode)
}

pub fn solve(scenario: &Scenario, class: VehicleClass, mode: Mode) -> Result<SpatialSolution> {
    let demand = scenario.demand(class);
    if demand <= 0.0 {
        return Ok(empty(scenario, class, mode));
    }
    let report = check_supply_sufficiency(scenario);
    let spaces = match class {
        VehicleClass::Av => report.av_spaces,
        VehicleClass::Hv => report.hv_spaces,
    };
    if spaces <= demand {
        return Err(Error::SupplyInfeasible {
            class,
            demand,
            max_mass: spaces,
        });
    }

    let field = Field::new(scenario, class, mode);
    let span_max = scenario.supply_span();
    let mut shots = 0;
    let mut fire = |span: f64| -> Result<Shot> {
        shots += 1;
        if shots > MAX_SHOTS {
            return Err(Error::NonConvergence {
                what: "span shooting",
                iterations: MAX_SHOTS,
            });
        }
        field.integrate(span)
    };
    let close = |mass: f64| (mass - demand).abs() <= MASS_RTOL * demand;

    let mut hi = span_max;
    let mut hi_path = None;
    match fire(hi)? {
        Shot::Reached(p) if p.mass < demand * (1.0 - MASS_ACCEPT) => {
            return Err(Error::SupplyInfeasible {
                class,
                demand,
                max_mass: p.mass,
            })
        }
        Shot::Reached(p) if close(p.mass) => return field.finish(p, 1),
        Shot::Reached(p) => hi_path = Some(p),
        Shot::Saturated => {}
        Shot::Negative => {
            return Err(Error::NonConvergence {
                what: "density turns negative over the full supply span",
                iterations: 1,
            })
        }
    }

    let mut lo = hi;
    let mut lo_path = None;
    while lo_path.is_none() {
        lo *= 0.5;
        match fire(lo)? {
            Shot::Reached(p) if close(p.mass) => return field.finish(p, shots),
            Shot::Reached(p) if p.mass < demand => lo_path = Some(p),
            Shot::Reached(p) => {
                hi = lo;
                hi_path = Some(p);
            }
            Shot::Saturated => {
                hi = lo;
                hi_path = None;
            }
            // A rejected run means the span was too short for the profile.
            Shot::Negative => break,
        }
    }

    while hi - lo > SPAN_RTOL * span_max {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match fire(mid)? {
            Shot::Reached(p) if close(p.mass) => return field.finish(p, shots),
            Shot::Reached(p) if p.mass < demand => {
                lo = mid;
                lo_path = Some(p);
            }
            Shot::Reached(p) => {
                hi = mid;
                hi_path = Some(p);
            }
            Shot::Saturated => {
                hi = mid;
                hi_path = None;
            }
            Shot::Negative => lo = mid,
        }
    }

    let best = [lo_path.as_ref(), hi_path.as_ref()]
        .into_iter()
        .flatten()
        .min_by(|a, b| (a.mass - demand).abs().total_cmp(&(b.mass - demand).abs()));
    match best {
        Some(p) if (p.mass - demand).abs() <= MASS_ACCEPT * demand => field.finish(p.clone(), shots),
        // Mass jumps from below demand straight to saturation.
        _ if hi_path.is_none() => Err(Error::SupplyInfeasible {
            class,
            demand,
            max_mass: lo_path.map_or(0.0, |p| p.mass),
        }),
        _ => Err(Error::NonConvergence {
            what: "span bisection collapsed without matching demand",
            iterations: shots,
        }),
    }
}

/// Zero-demand solution: empty span, level at the empty-lot cost.
pub(crate) fn empty(scenario: &Scenario, class: VehicleClass, mode: Mode) -> SpatialSolution {
    let model = scenario.search();
    let mut level = scenario.search_value(class) * model.min_time();
    if mode == Mode::Equilibrium && class == VehicleClass::Av {
        level += scenario.cruise_coeff(VehicleClass::Hv) * scenario.demand(VehicleClass::Hv);
    }
    SpatialSolution {
        class,
        mode,
        search: model,
        method: Method::Empty,
        xs: vec![0.0],
        density: vec![0.0],
        capacity: vec![scenario.capacity(class, 0.0)],
        span: 0.0,
        level,
        diagnostics: Diagnostics::default(),
    }
}

/// Largest gap between the level and the equalized cost over the grid,
/// relative to the level. Kink points compare against the subdifferential;
/// with `capped` the steep branch is treated as vertical.
pub(crate) fn flatness(scenario: &Scenario, sol: &SpatialSolution, capped: bool) -> Result<f64> {
    let kink = |n: f64, m: f64| match sol.search {
        SearchModel::Piecewise(p) => crate::search::at_kink(n, m, &p),
        SearchModel::Binomial => false,
    };
    let bounds: Vec<(f64, f64)> = match sol.mode {
        Mode::Equilibrium => cost::cost_profile(scenario, sol)?
            .iter()
            .zip(sol.density.iter().zip(&sol.capacity))
            .map(|(c, (&n, &m))| {
                let hi = if capped && kink(n, m) { f64::INFINITY } else { c.total };
                (c.total, hi)
            })
            .collect(),
        Mode::Optimum => cost::marginal_profile(scenario, sol)?
            .into_iter()
            .zip(sol.density.iter().zip(&sol.capacity))
            .map(|((lo, hi), (&n, &m))| (lo, if capped && kink(n, m) { f64::INFINITY } else { hi }))
            .collect(),
    };
    let scale = sol.level.abs().max(f64::MIN_POSITIVE);
    Ok(bounds
        .iter()
        .map(|&(lo, hi)| (lo - sol.level).max(sol.level - hi).max(0.0) / scale)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
struct Path {
    /// Decreasing, from the span edge to 0.
    xs: Vec<f64>,
    n: Vec<f64>,
    mass: f64,
    kinks: usize,
    interior_zero: bool,
}

enum Shot {
    Reached(Path),
    /// Occupancy hit full before reaching the CBD: the span is too long.
    Saturated,
    /// Density went negative: the span is too short.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Free(Branch),
    /// Optimum pinned to the piecewise kink while the level lies in the
    /// marginal-cost subdifferential there.
    Hold,
}

struct Field<'a> {
    scenario: &'a Scenario,
    class: VehicleClass,
    mode: Mode,
    model: SearchModel,
    lambda: f64,
    beta: f64,
    gamma: f64,
    /// HV cruisers pass those parked further out (+1); AVs those closer in (-1).
    sign: f64,
}

impl<'a> Field<'a> {
    fn new(scenario: &'a Scenario, class: VehicleClass, mode: Mode) -> Self {
        Field {
            scenario,
            class,
            mode,
            model: scenario.search(),
            lambda: scenario.distance_cost(class),
            beta: scenario.cruise_coeff(class),
            gamma: scenario.search_value(class),
            sign: match class {
                VehicleClass::Av => -1.0,
                VehicleClass::Hv => 1.0,
            },
        }
    }

    fn cap(&self, x: f64) -> f64 {
        self.scenario.capacity(self.class, x)
    }

    /// `dn/dx`, or `None` outside the search model's domain.
    fn slope(&self, branch: Branch, x: f64, n: f64) -> Result<Option<f64>> {
        let m = self.cap(x);
        if !(m > 0.0) || !n.is_finite() {
            return Ok(None);
        }
        if self.model == SearchModel::Binomial && n >= m * (1.0 - POLE_GUARD) {
            return Ok(None);
        }
        let dm = self.scenario.capacity_slope(self.class, x);
        let p = self.model.partials_on(branch, n.max(0.0), m);
        let v = match self.mode {
            Mode::Equilibrium => {
                ((-self.lambda + self.sign * self.beta * n) / self.gamma - p.dm * dm) / p.dn
            }
            Mode::Optimum => {
                let den = 2.0 * p.dn + n * p.dnn;
                if !(den > 0.0 && den.is_finite()) {
                    return Err(Error::DegenerateSearchModel { x });
                }
                -(self.lambda / self.gamma + (p.dm + n * p.dnm) * dm) / den
            }
        };
        Ok(v.is_finite().then_some(v))
    }

    /// One RK4 step from `x` to `x - h`, returning the new density and the
    /// mass parked on `[x - h, x]`.
    fn rk4(&self, branch: Branch, x: f64, n: f64, h: f64) -> Result<Option<(f64, f64)>> {
        let Some(k1) = self.slope(branch, x, n)? else {
            return Ok(None);
        };
        let n2 = n - 0.5 * h * k1;
        let Some(k2) = self.slope(branch, x - 0.5 * h, n2)? else {
            return Ok(None);
        };
        let n3 = n - 0.5 * h * k2;
        let Some(k3) = self.slope(branch, x - 0.5 * h, n3)? else {
            return Ok(None);
        };
        let n4 = n - h * k3;
        let Some(k4) = self.slope(branch, x - h, n4)? else {
            return Ok(None);
        };
        Ok(Some((
            n - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            h / 6.0 * (n + 2.0 * n2 + 2.0 * n3 + n4),
        )))
    }

    /// Step length in `(0, h]` after which a lower-branch step lands on the kink.
    fn kink_crossing(&self, x: f64, n: f64, h: f64, kink: f64) -> Result<(f64, f64)> {
        let over = |t: f64| -> Result<bool> {
            Ok(match self.rk4(Branch::Lower, x, n, t)? {
                Some((v, _)) => v > kink * self.cap(x - t),
                None => true,
            })
        };
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if over(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mass = self.rk4(Branch::Lower, x, n, hi)?.map_or(0.0, |(_, dm)| dm);
        Ok((hi, mass))
    }

    fn integrate(&self, span: f64) -> Result<Shot> {
        let h = span / GRID_STEPS as f64;
        let piecewise = match self.model {
            SearchModel::Piecewise(p) => Some(p),
            SearchModel::Binomial => None,
        };
        let kink = piecewise.map_or(1.0, |p| p.kink());
        // Optimum level and the location below which the kink hold ends.
        let level = self.lambda * span + self.gamma * self.model.min_time();
        let hold_exit = piecewise.map_or(f64::NEG_INFINITY, |p| {
            (level - self.gamma * (p.delta + p.steep) * kink) / self.lambda
        });

        let mut phase = Phase::Free(if piecewise.is_some() { Branch::Lower } else { Branch::Smooth });
        let mut path = Path {
            xs: Vec::with_capacity(GRID_STEPS + 8),
            n: Vec::with_capacity(GRID_STEPS + 8),
            mass: 0.0,
            kinks: 0,
            interior_zero: false,
        };
        let (mut x, mut n) = (span, 0.0);
        path.xs.push(x);
        path.n.push(n);

        for i in 1..=GRID_STEPS {
            let target = if i == GRID_STEPS { 0.0 } else { span - h * i as f64 };
            while x > target {
                match phase {
                    Phase::Hold => {
                        let next = if hold_exit > target && hold_exit < x { hold_exit } else { target };
                        path.mass += kink * quad::simpson(|u| self.cap(u), next, x, 2);
                        x = next;
                        n = kink * self.cap(x);
                        path.kinks += 1;
                        if next == hold_exit {
                            phase = Phase::Free(Branch::Steep);
                        }
                    }
                    Phase::Free(branch) => {
                        let m_here = self.cap(x);
                        let mut step = x - target;
                        if self.model == SearchModel::Binomial && n > POLE_ZONE * m_here {
                            step = step.min(0.5 * h);
                        }
                        let Some((mut n_new, dmass)) = self.rk4(branch, x, n, step)? else {
                            return Ok(Shot::Saturated);
                        };
                        let x_new = if step == x - target { target } else { x - step };
                        let m_new = self.cap(x_new);

                        if branch == Branch::Lower && piecewise.is_some() && n_new > kink * m_new {
                            let (t, dm) = self.kink_crossing(x, n, step, kink)?;
                            x = if t >= step { x_new } else { x - t };
                            n = kink * self.cap(x);
                            path.mass += dm;
                            path.kinks += 1;
                            phase = match self.mode {
                                Mode::Equilibrium => Phase::Free(Branch::Steep),
                                Mode::Optimum if x > hold_exit => Phase::Hold,
                                Mode::Optimum => Phase::Free(Branch::Steep),
                            };
                            path.xs.push(x);
                            path.n.push(n);
                            continue;
                        }

                        let saturated = match self.model {
                            SearchModel::Binomial => n_new >= m_new * (1.0 - POLE_GUARD),
                            SearchModel::Piecewise(_) => n_new > m_new,
                        };
                        if saturated {
                            return Ok(Shot::Saturated);
                        }
                        if n_new < 0.0 {
                            if n_new < -1e-9 * m_new.max(1.0) {
                                return Ok(Shot::Negative);
                            }
                            n_new = 0.0;
                            path.interior_zero |= x_new > 0.0;
                        }
                        if branch == Branch::Steep && n_new < kink * m_new {
                            phase = Phase::Free(Branch::Lower);
                        }
                        x = x_new;
                        n = n_new;
                        path.mass += dmass;
                    }
                }
                path.xs.push(x);
                path.n.push(n);
            }
        }
        Ok(Shot::Reached(path))
    }

    fn finish(&self, path: Path, iterations: usize) -> Result<SpatialSolution> {
        let Path {
            mut xs,
            n: mut density,
            kinks,
            interior_zero,
            ..
        } = path;
        xs.reverse();
        density.reverse();
        let span = *xs.last().expect("a path has at least its edge point");
        let capacity = xs.iter().map(|&x| self.cap(x)).collect();
        let mut sol = SpatialSolution {
            class: self.class,
            mode: self.mode,
            search: self.model,
            method: Method::Shooting,
            xs,
            density,
            capacity,
            span,
            level: 0.0,
            diagnostics: Diagnostics::default(),
        };
        sol.level = match self.mode {
            Mode::Equilibrium => {
                let costs = cost::cost_profile(self.scenario, &sol)?;
                let tail = &costs[costs.len().saturating_sub(LEVEL_POINTS)..];
                tail.iter().map(|c| c.total).sum::<f64>() / tail.len() as f64
            }
            Mode::Optimum => self.lambda * span + self.gamma * self.model.min_time(),
        };
        let demand = self.scenario.demand(self.class);
        sol.diagnostics = Diagnostics {
            iterations,
            mass_residual: (sol.mass() - demand).abs() / demand,
            flatness: flatness(self.scenario, &sol, false)?,
            kink_points: kinks,
            interior_zero,
        };
        Ok(sol)
    }
}
