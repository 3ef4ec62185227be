//! Brute-force cross-checks on a uniform bin grid, independent of the
//! shooting solver: a convex minimization for the optimum, a cost-equalizing
//! fixed point for the equilibrium, and finite-difference marginal costs.

use serde::Serialize;

use crate::corridor::{self, Mode};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, VehicleClass};
use crate::search::{SearchModel, POLE_GUARD};

/// Bins below this count are accepted but too coarse for the tolerances the
/// verification report applies.
pub const MIN_RELIABLE_BINS: usize = 100;
/// Bins with more parked vehicles than this count as used.
pub const ACTIVE_DENSITY: f64 = 1e-6;
const PROJECTION_STEPS: usize = 200;
const LEVEL_STEPS: usize = 200;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub bins: usize,
    /// Right end of the grid; defaults to twice the solver's span, capped at
    /// the supply span.
    pub x_max: Option<f64>,
    pub max_iter: usize,
    /// Relative stationarity target.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            bins: 2000,
            x_max: None,
            max_iter: 500,
            tol: 1e-9,
        }
    }
}

impl OracleOptions {
    pub fn with_bins(bins: usize) -> Self {
        OracleOptions {
            bins,
            ..Self::default()
        }
    }
}

/// Starting point of the equilibrium fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Init {
    /// Cruising computed as if nobody had parked yet.
    Empty,
    /// Cruising of demand spread evenly over the grid.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedSolution {
    pub class: VehicleClass,
    pub mode: Mode,
    /// Bin centers.
    pub xs: Vec<f64>,
    pub width: f64,
    pub capacity: Vec<f64>,
    pub density: Vec<f64>,
    /// `Σ (λx + γS) n h`, cruising excluded.
    pub objective: f64,
    /// Common marginal cost (optimum) or generalized cost (equilibrium).
    pub level: f64,
    pub iterations: usize,
    pub mass_residual: f64,
    /// Largest relative deviation from the equalization condition.
    pub kkt_spread: f64,
    /// Objective after every accepted iterate (optimum only).
    pub trace: Vec<f64>,
}

impl BinnedSolution {
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.width
    }

    /// Center of the outermost used bin.
    pub fn span(&self) -> f64 {
        self.xs
            .iter()
            .zip(&self.density)
            .filter(|(_, &n)| n > ACTIVE_DENSITY)
            .map(|(&x, _)| x)
            .fold(0.0, f64::max)
    }
}

struct Grid {
    class: VehicleClass,
    model: SearchModel,
    lambda: f64,
    gamma: f64,
    demand: f64,
    h: f64,
    xs: Vec<f64>,
    m: Vec<f64>,
    cap: Vec<f64>,
}

impl Grid {
    fn new(scenario: &Scenario, class: VehicleClass, mode: Mode, opts: &OracleOptions) -> Result<Self> {
        if opts.bins < 2 {
            return Err(Error::invalid("bins", "need at least 2 bins"));
        }
        let x_max = match opts.x_max {
            Some(x) if x > 0.0 && x.is_finite() => x,
            Some(x) => return Err(Error::invalid("x_max", format!("{x} is not a positive length"))),
            None => default_extent(scenario, class, mode)?,
        };
        let h = x_max / opts.bins as f64;
        let model = scenario.search();
        let xs: Vec<f64> = (0..opts.bins).map(|j| (j as f64 + 0.5) * h).collect();
        let m: Vec<f64> = xs.iter().map(|&x| scenario.capacity(class, x).max(0.0)).collect();
        let cap = m
            .iter()
            .map(|&m| match model {
                SearchModel::Binomial => m * (1.0 - POLE_GUARD),
                SearchModel::Piecewise(_) => m,
            })
            .collect();
        Ok(Grid {
            class,
            model,
            lambda: scenario.distance_cost(class),
            gamma: scenario.search_value(class),
            demand: scenario.demand(class),
            h,
            xs,
            m,
            cap,
        })
    }

    fn len(&self) -> usize {
        self.xs.len()
    }

    fn room(&self) -> f64 {
        self.cap.iter().sum::<f64>() * self.h
    }

    fn search(&self, j: usize, n: f64) -> f64 {
        let m = self.m[j];
        match self.model {
            SearchModel::Binomial => m / (m - n),
            SearchModel::Piecewise(p) => {
                let occ = n / m;
                if occ <= p.kink() {
                    p.delta * occ
                } else {
                    p.delta * p.kink() + p.steep * (occ - p.kink())
                }
            }
        }
    }

    fn bin_cost(&self, j: usize, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        (self.lambda * self.xs[j] + self.gamma * self.search(j, n)) * n * self.h
    }

    fn objective(&self, n: &[f64]) -> f64 {
        (0..self.len()).map(|j| self.bin_cost(j, n[j])).sum()
    }

    /// Smooth part of one bin's cost: `(λx + γ S_s) n h` with the piecewise
    /// model split as `S = δ n/m + (Δ - δ)(n/m - c)₊`. Returns value,
    /// gradient and curvature.
    fn smooth(&self, j: usize, n: f64) -> (f64, f64, f64) {
        let (m, h, g) = (self.m[j], self.h, self.gamma);
        let lx = self.lambda * self.xs[j];
        match self.model {
            SearchModel::Binomial => {
                let gap = m - n;
                let s = m / gap;
                let sn = m / (gap * gap);
                let snn = 2.0 * sn / gap;
                ((lx + g * s) * n * h, (lx + g * (s + n * sn)) * h, g * (2.0 * sn + n * snn) * h)
            }
            SearchModel::Piecewise(p) => {
                let d = p.delta / m;
                ((lx + g * d * n) * n * h, (lx + 2.0 * g * d * n) * h, 2.0 * g * d * h)
            }
        }
    }

    /// Weight `a` of the nonsmooth part `a (n²/m - c n)` above the kink.
    fn kink_weight(&self) -> Option<(f64, f64)> {
        match self.model {
            SearchModel::Binomial => None,
            SearchModel::Piecewise(p) => Some((self.gamma * (p.steep - p.delta) * self.h, p.kink())),
        }
    }

    fn kink_value(&self, n: &[f64]) -> f64 {
        let Some((a, c)) = self.kink_weight() else {
            return 0.0;
        };
        n.iter()
            .zip(&self.m)
            .filter(|(&n, &m)| m > 0.0 && n > c * m)
            .map(|(&n, &m)| a * (n / m - c) * n)
            .sum()
    }

    /// Subdifferential of the marginal cost `λx + γ(S + n ∂S/∂n)` at bin `j`.
    fn marginal_bounds(&self, j: usize, n: f64) -> (f64, f64) {
        let (m, lx, g) = (self.m[j], self.lambda * self.xs[j], self.gamma);
        match self.model {
            SearchModel::Binomial => {
                let gap = m - n;
                let v = lx + g * (m / gap + n * m / (gap * gap));
                (v, v)
            }
            SearchModel::Piecewise(p) => {
                let occ = n / m;
                let lower = lx + g * 2.0 * p.delta * occ;
                let upper = lx + g * (p.delta * p.kink() + p.steep * (2.0 * occ - p.kink()));
                if on_kink(occ, p.kink()) {
                    (lower, upper)
                } else if occ < p.kink() {
                    (lower, lower)
                } else {
                    (upper, upper)
                }
            }
        }
    }

    /// Minimizer of `(H/2t)(n - y)² + kink(n) - ν h n` over `[0, cap]`.
    fn prox(&self, j: usize, y: f64, scale: f64, nu: f64) -> f64 {
        let cap = self.cap[j];
        if cap <= 0.0 {
            return 0.0;
        }
        let z = y + scale * nu * self.h;
        let Some((a, c)) = self.kink_weight() else {
            return z.clamp(0.0, cap);
        };
        let m = self.m[j];
        let knot = c * m;
        if z <= knot {
            return z.max(0.0);
        }
        let upper = (y / scale + a * c + nu * self.h) / (1.0 / scale + 2.0 * a / m);
        if upper >= knot {
            upper.min(cap)
        } else {
            knot
        }
    }

    /// Exact projection for the proximal step: bisection on the mass
    /// multiplier, every bin solved in closed form.
    fn project(&self, y: &[f64], scale: &[f64]) -> Vec<f64> {
        let place = |nu: f64| -> Vec<f64> { (0..self.len()).map(|j| self.prox(j, y[j], scale[j], nu)).collect() };
        let excess = |nu: f64| place(nu).iter().sum::<f64>() * self.h - self.demand;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while excess(lo) > 0.0 {
            lo *= 2.0;
        }
        while excess(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..PROJECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(1e-300) {
                break;
            }
        }
        place(0.5 * (lo + hi))
    }

    /// Largest relative violation of the equal-marginal conditions.
    fn kkt(&self, n: &[f64]) -> (f64, f64) {
        let mut active = Vec::new();
        for j in 0..self.len() {
            if n[j] > ACTIVE_DENSITY && n[j] < self.cap[j] {
                active.push(self.marginal_bounds(j, n[j]));
            }
        }
        if active.is_empty() {
            return (f64::NAN, f64::INFINITY);
        }
        // Smallest level consistent with every active subdifferential.
        let level = active.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
        let scale = level.abs().max(f64::MIN_POSITIVE);
        let mut spread: f64 = active.iter().map(|b| (level - b.1).max(0.0)).fold(0.0, f64::max);
        for j in 0..self.len() {
            let (lo, hi) = self.marginal_bounds(j, n[j]);
            if n[j] <= ACTIVE_DENSITY && self.cap[j] > 0.0 {
                spread = spread.max(level - hi);
            } else if n[j] >= self.cap[j] && self.cap[j] > 0.0 {
                spread = spread.max(lo - level);
            }
        }
        (level, spread.max(0.0) / scale)
    }
}

fn on_kink(occ: f64, kink: f64) -> bool {
    (occ - kink).abs() <= 1e-9 * kink.max(1.0)
}

fn default_extent(scenario: &Scenario, class: VehicleClass, mode: Mode) -> Result<f64> {
    let span = corridor::solve(scenario, class, mode)?.span;
    let span = if span > 0.0 { span } else { scenario.supply_span() / 2.0 };
    Ok((2.0 * span).min(scenario.supply_span()))
}

fn empty_solution(grid: &Grid, mode: Mode) -> BinnedSolution {
    BinnedSolution {
        class: grid.class,
        mode,
        xs: grid.xs.clone(),
        width: grid.h,
        capacity: grid.m.clone(),
        density: vec![0.0; grid.len()],
        objective: 0.0,
        level: 0.0,
        iterations: 0,
        mass_residual: 0.0,
        kkt_spread: 0.0,
        trace: vec![0.0],
    }
}

fn check_room(grid: &Grid) -> Result<()> {
    let room = grid.room();
    if room <= grid.demand {
        return Err(Error::SupplyInfeasible {
            class: grid.class,
            demand: grid.demand,
            max_mass: room,
        });
    }
    Ok(())
}

/// Minimizes the binned parking cost of one class subject to demand and
/// capacity, by projected Newton-scaled steps with backtracking. The
/// piecewise kink is handled exactly inside the projection, so the
/// objective never increases.
pub fn binned_optimum(scenario: &Scenario, class: VehicleClass, opts: &OracleOptions) -> Result<BinnedSolution> {
    let grid = Grid::new(scenario, class, Mode::Optimum, opts)?;
    if grid.demand <= 0.0 {
        return Ok(empty_solution(&grid, Mode::Optimum));
    }
    check_room(&grid)?;

    let bins = grid.len();
    let start: Vec<f64> = (0..bins).map(|j| 0.5 * grid.cap[j]).collect();
    let mut n = grid.project(&start, &vec![1.0; bins]);
    let total = |n: &[f64]| grid.objective(n);
    let mut f = total(&n);
    let mut trace = vec![f];
    let mut iterations = 0;
    let (mut level, mut spread) = grid.kkt(&n);

    while spread > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut y = vec![0.0; bins];
        let mut inv_h = vec![0.0; bins];
        let mut grad = vec![0.0; bins];
        for j in 0..bins {
            if grid.cap[j] <= 0.0 {
                continue;
            }
            let (_, g, h) = grid.smooth(j, n[j]);
            grad[j] = g;
            inv_h[j] = 1.0 / h;
        }
        let kink_now = grid.kink_value(&n);
        let mut t = 1.0;
        let accepted = loop {
            let scale: Vec<f64> = inv_h.iter().map(|v| t * v).collect();
            for j in 0..bins {
                y[j] = n[j] - scale[j] * grad[j];
            }
            let trial = grid.project(&y, &scale);
            let predicted: f64 = (0..bins).map(|j| grad[j] * (trial[j] - n[j])).sum::<f64>()
                + grid.kink_value(&trial)
                - kink_now;
            let value = total(&trial);
            if value.is_finite() && value <= f + ARMIJO * predicted.min(0.0) {
                break Some((trial, value));
            }
            t *= 0.5;
            if t < 1e-14 {
                break None;
            }
        };
        let Some((trial, value)) = accepted else {
            break;
        };
        let stalled = f - value <= 1e-15 * f.abs();
        n = trial;
        f = value;
        trace.push(f);
        (level, spread) = grid.kkt(&n);
        if stalled {
            break;
        }
    }

    if !(spread <= opts.tol.max(1e-6)) {
        return Err(Error::NonConvergence {
            what: "binned optimum stationarity",
            iterations,
        });
    }
    let mass = n.iter().sum::<f64>() * grid.h;
    Ok(BinnedSolution {
        class,
        mode: Mode::Optimum,
        xs: grid.xs.clone(),
        width: grid.h,
        capacity: grid.m.clone(),
        objective: f,
        level,
        iterations,
        mass_residual: (mass - grid.demand).abs() / grid.demand,
        kkt_spread: spread,
        trace,
        density: n,
    })
}

/// Cruising cost at each bin center for a binned density. Bins count half
/// of their own vehicles.
fn cruising(scenario: &Scenario, class: VehicleClass, h: f64, n: &[f64]) -> Vec<f64> {
    let beta = scenario.cruise_coeff(class);
    let mut out = vec![0.0; n.len()];
    match class {
        VehicleClass::Av => {
            let base = scenario.cruise_coeff(VehicleClass::Hv) * scenario.demand(VehicleClass::Hv);
            let mut inner = 0.0;
            for (j, &v) in n.iter().enumerate() {
                out[j] = base + beta * (inner + 0.5 * v * h);
                inner += v * h;
            }
        }
        VehicleClass::Hv => {
            let mut outer = 0.0;
            for (j, &v) in n.iter().enumerate().rev() {
                out[j] = beta * (outer + 0.5 * v * h);
                outer += v * h;
            }
        }
    }
    out
}

/// Binned `Σ c_i n_i h` of any distribution.
pub fn binned_cruising_cost(scenario: &Scenario, sol: &BinnedSolution) -> f64 {
    cruising(scenario, sol.class, sol.width, &sol.density)
        .iter()
        .zip(&sol.density)
        .map(|(c, n)| c * n * sol.width)
        .sum()
}

/// Densities equalizing cost at `p` given fixed cruising costs.
fn fill(grid: &Grid, cruise: &[f64], p: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|j| {
            let m = grid.m[j];
            if grid.cap[j] <= 0.0 {
                return 0.0;
            }
            let s = (p - grid.lambda * grid.xs[j] - cruise[j]) / grid.gamma;
            match grid.model.invert_time(s, m) {
                Some(n) => n.min(grid.cap[j]),
                None => grid.cap[j],
            }
        })
        .collect()
}

/// Level at which the filled densities carry exactly the demand.
fn clearing_level(grid: &Grid, cruise: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mass = |p: f64| fill(grid, cruise, p).iter().sum::<f64>() * grid.h;
    let floor = (0..grid.len())
        .map(|j| grid.lambda * grid.xs[j] + cruise[j] + grid.gamma * grid.model.min_time())
        .fold(f64::INFINITY, f64::min);
    let mut lo = floor;
    let mut hi = floor + 1.0;
    let mut grow = 0;
    while mass(hi) < grid.demand {
        hi = lo + 2.0 * (hi - lo);
        grow += 1;
        if grow > 200 {
            return Err(Error::SupplyInfeasible {
                class: grid.class,
                demand: grid.demand,
                max_mass: grid.room(),
            });
        }
    }
    for _ in 0..LEVEL_STEPS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < grid.demand {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    let p = 0.5 * (lo + hi);
    Ok((p, fill(grid, cruise, p)))
}

/// Equal-cost distribution of one class: outer bisection on the common cost,
/// inner per-bin inversion of the search time, and a damped fixed point on
/// the cruising coupling.
pub fn binned_equilibrium(
    scenario: &Scenario,
    class: VehicleClass,
    opts: &OracleOptions,
    init: Init,
) -> Result<BinnedSolution> {
    let grid = Grid::new(scenario, class, Mode::Equilibrium, opts)?;
    if grid.demand <= 0.0 {
        return Ok(empty_solution(&grid, Mode::Equilibrium));
    }
    check_room(&grid)?;

    let seed = match init {
        Init::Empty => vec![0.0; grid.len()],
        Init::Uniform => vec![grid.demand / (grid.h * grid.len() as f64); grid.len()],
    };
    let mut cruise = cruising(scenario, class, grid.h, &seed);
    let mut damping = 0.5;
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;
    let (p, n) = loop {
        iterations += 1;
        let (p, n) = clearing_level(&grid, &cruise)?;
        let next = cruising(scenario, class, grid.h, &n);
        let gap = next
            .iter()
            .zip(&cruise)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap <= opts.tol * p.abs().max(1.0) {
            break (p, n);
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "binned equilibrium cruising fixed point",
                iterations,
            });
        }
        if gap > last_gap {
            damping *= 0.5;
        }
        last_gap = gap;
        for (c, v) in cruise.iter_mut().zip(&next) {
            *c += damping * (v - *c);
        }
    };

    let total: Vec<f64> = (0..grid.len())
        .map(|j| grid.lambda * grid.xs[j] + grid.gamma * grid.search(j, n[j]) + cruise[j])
        .collect();
    let mut spread: f64 = 0.0;
    for j in 0..grid.len() {
        if grid.cap[j] <= 0.0 {
            continue;
        }
        let dev = if n[j] > ACTIVE_DENSITY && n[j] < grid.cap[j] {
            (total[j] - p).abs()
        } else if n[j] <= ACTIVE_DENSITY {
            (p - total[j]).max(0.0)
        } else {
            (total[j] - p).max(0.0)
        };
        // Bins at the span edge are partly filled in the continuum.
        if n[j] > 0.0 && n[j] <= ACTIVE_DENSITY {
            continue;
        }
        spread = spread.max(dev);
    }
    let mass = n.iter().sum::<f64>() * grid.h;
    Ok(BinnedSolution {
        class,
        mode: Mode::Equilibrium,
        xs: grid.xs.clone(),
        width: grid.h,
        capacity: grid.m.clone(),
        objective: grid.objective(&n),
        level: p,
        iterations,
        mass_residual: (mass - grid.demand).abs() / grid.demand,
        kkt_spread: spread / p.abs().max(f64::MIN_POSITIVE),
        trace: Vec::new(),
        density: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DifferenceKind {
    Central,
    /// At a bound; forward or backward difference substituted.
    OneSided,
    /// The difference stencil crosses the piecewise kink.
    Kink,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub bin: usize,
    pub x: f64,
    pub finite_difference: f64,
    pub analytic: f64,
    pub rel_error: f64,
    pub kind: DifferenceKind,
}

/// Finite-difference marginal cost of bin `j` of a binned solution, next to
/// the analytic `λx + γ(S + n ∂S/∂n)`.
pub fn finite_difference_marginal(
    scenario: &Scenario,
    sol: &BinnedSolution,
    j: usize,
) -> Result<MarginalCheck> {
    if j >= sol.density.len() {
        return Err(Error::invalid("bin", format!("{j} is beyond {} bins", sol.density.len())));
    }
    let class = sol.class;
    let model = scenario.search();
    let (x, m, n) = (sol.xs[j], sol.capacity[j], sol.density[j]);
    if m <= 0.0 {
        return Err(Error::invalid("bin", format!("bin {j} has no capacity")));
    }
    let (lambda, gamma) = (scenario.distance_cost(class), scenario.search_value(class));
    let cap = match model {
        SearchModel::Binomial => m * (1.0 - POLE_GUARD),
        SearchModel::Piecewise(_) => m,
    };
    let cost = |v: f64| -> Result<f64> {
        if v <= 0.0 {
            return Ok(0.0);
        }
        Ok((lambda * x + gamma * model.search_time(v, m)?) * v * sol.width)
    };

    let mut step = 1e-4 * n;
    let (lo, hi, mut kind) = if n <= 0.0 {
        step = 1e-8 * m;
        (0.0, step, DifferenceKind::OneSided)
    } else if n + step > cap {
        (n - step, n, DifferenceKind::OneSided)
    } else {
        (n - step, n + step, DifferenceKind::Central)
    };
    if let SearchModel::Piecewise(p) = model {
        let knot = p.kink() * m;
        if lo <= knot && knot <= hi {
            kind = DifferenceKind::Kink;
        }
    }
    let fd = (cost(hi)? - cost(lo)?) / ((hi - lo) * sol.width);
    let analytic = if n <= 0.0 {
        lambda * x + gamma * model.min_time()
    } else {
        lambda * x + gamma * model.marginal_factor(n, m)?
    };
    Ok(MarginalCheck {
        bin: j,
        x,
        finite_difference: fd,
        analytic,
        rel_error: (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE),
        kind,
    })
}

/// Worst relative finite-difference error over used, central, off-kink bins,
/// with the count of bins flagged and excluded.
pub fn marginal_check(scenario: &Scenario, sol: &BinnedSolution) -> Result<(f64, usize)> {
    let mut worst: f64 = 0.0;
    let mut flagged = 0;
    for j in 0..sol.density.len() {
        if sol.density[j] <= ACTIVE_DENSITY || sol.capacity[j] <= 0.0 {
            continue;
        }
        let check = finite_difference_marginal(scenario, sol, j)?;
        if check.kind == DifferenceKind::Central {
            worst = worst.max(check.rel_error);
        } else {
            flagged += 1;
        }
    }
    Ok((worst, flagged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scenario::SearchKind;

    fn coarse() -> OracleOptions {
        OracleOptions::with_bins(400)
    }

    #[test]
    fn zero_demand_is_empty() {
        let s = presets::base(SearchKind::Binomial, 0.5).with_penetration(0.0).unwrap();
        let opt = binned_optimum(&s, VehicleClass::Av, &coarse()).unwrap();
        assert_eq!(opt.objective, 0.0);
        assert!(opt.density.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn optimum_conserves_mass_and_never_climbs() {
        for kind in [SearchKind::Binomial, SearchKind::Piecewise] {
            let s = presets::base(kind, 0.5);
            for class in VehicleClass::ALL {
                let sol = binned_optimum(&s, class, &coarse()).unwrap();
                assert!(sol.mass_residual < 1e-6, "{kind:?} {class}");
                assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
                assert!(sol.kkt_spread < 1e-6, "{kind:?} {class}: {}", sol.kkt_spread);
                assert!(sol.density.iter().zip(&sol.capacity).all(|(n, m)| *n >= 0.0 && n <= m));
            }
        }
    }

    #[test]
    fn equilibrium_without_cruising_settles_in_one_pass() {
        let s = presets::base(SearchKind::Binomial, 0.5).without_cruising();
        let sol = binned_equilibrium(&s, VehicleClass::Hv, &coarse(), Init::Empty).unwrap();
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn equilibrium_is_independent_of_the_start() {
        let s = presets::base(SearchKind::Binomial, 0.5);
        for class in VehicleClass::ALL {
            let a = binned_equilibrium(&s, class, &coarse(), Init::Empty).unwrap();
            let b = binned_equilibrium(&s, class, &coarse(), Init::Uniform).unwrap();
            assert!((a.level - b.level).abs() < 1e-4, "{class}: {} {}", a.level, b.level);
        }
    }

    #[test]
    fn empty_bin_marginal_is_the_bare_cost() {
        let s = presets::base(SearchKind::Binomial, 0.5);
        let sol = binned_optimum(&s, VehicleClass::Av, &coarse()).unwrap();
        let j = sol.density.len() - 1;
        let check = finite_difference_marginal(&s, &sol, j).unwrap();
        assert_eq!(check.kind, DifferenceKind::OneSided);
        assert!((check.analytic - (0.5 * sol.xs[j] + 0.05)).abs() < 1e-12);
        assert!(check.rel_error < 1e-6);
    }

    #[test]
    fn kink_bins_are_flagged() {
        let s = presets::base(SearchKind::Piecewise, 0.5);
        let sol = binned_optimum(&s, VehicleClass::Hv, &coarse()).unwrap();
        let (worst, flagged) = marginal_check(&s, &sol).unwrap();
        assert!(flagged > 0);
        assert!(worst < 1e-4);
    }
}
