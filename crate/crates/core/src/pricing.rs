//! Location-differentiated parking prices that decentralize the optimum,
//! and the aggregate costs with and without them.

use serde::Serialize;

use crate::corridor::{self, CorridorSolution, Mode, SpatialSolution};
use crate::cost::{self, clamp_density};
use crate::error::Result;
use crate::par::Execution;
use crate::scenario::{Scenario, VehicleClass};
use crate::search::{at_kink, SearchModel};

/// Price along one class's optimum span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceProfile {
    pub class: VehicleClass,
    pub xs: Vec<f64>,
    pub tau: Vec<f64>,
    pub span: f64,
    /// `P + τ` everywhere on the span once prices are in place.
    pub support_level: f64,
}

impl PriceProfile {
    /// Price at `x`, linear between grid points and zero beyond the span.
    pub fn at(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.span || self.xs.len() < 2 {
            return 0.0;
        }
        let j = self.xs.partition_point(|&u| u <= x).saturating_sub(1);
        if j + 1 >= self.xs.len() {
            return self.tau[j];
        }
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.tau[j] + t * (self.tau[j + 1] - self.tau[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingSchedule {
    pub av: PriceProfile,
    pub hv: PriceProfile,
    /// Total parking cost at the optimum distribution, transfers excluded.
    pub tp_min: f64,
    /// Total cost paid by travellers once prices are charged.
    pub tc: f64,
    pub net_revenue: f64,
}

impl PricingSchedule {
    pub fn get(&self, class: VehicleClass) -> &PriceProfile {
        match class {
            VehicleClass::Av => &self.av,
            VehicleClass::Hv => &self.hv,
        }
    }
}

fn support_level(scenario: &Scenario, sol: &SpatialSolution) -> f64 {
    match sol.class {
        VehicleClass::Av => {
            sol.level
                + scenario.cruise_coeff(VehicleClass::Hv) * scenario.demand(VehicleClass::Hv)
                + scenario.cruise_coeff(VehicleClass::Av) * scenario.demand(VehicleClass::Av)
        }
        VehicleClass::Hv => sol.level,
    }
}

/// `τ_a = β_a ∫ₓ n_a + γ_a n_a ∂S/∂n`, `τ_c = -β_c ∫ₓ n_c + γ_c n_c ∂S/∂n`.
/// On the piecewise kink the search term is the subgradient element that
/// keeps `P + τ` at the support level.
fn price_profile(scenario: &Scenario, sol: &SpatialSolution) -> Result<PriceProfile> {
    let class = sol.class;
    let beta = scenario.cruise_coeff(class);
    let gamma = scenario.search_value(class);
    let lambda = scenario.distance_cost(class);
    let sign = match class {
        VehicleClass::Av => 1.0,
        VehicleClass::Hv => -1.0,
    };
    let support = support_level(scenario, sol);
    let cum = sol.cumulative();
    let total = *cum.last().unwrap_or(&0.0);
    let cruise = cost::cruising_profile(scenario, sol);

    let mut tau = Vec::with_capacity(sol.xs.len());
    for j in 0..sol.xs.len() {
        let (x, m) = (sol.xs[j], sol.capacity[j]);
        let n = clamp_density(sol.search, sol.density[j], m);
        let outer = total - cum[j];
        let transfer = sign * beta * outer;
        let search_term = match sol.search {
            SearchModel::Piecewise(p) if n > 0.0 && at_kink(n, m, &p) => {
                let s = sol.search.search_time(n, m)?;
                let wanted = support - lambda * x - gamma * s - cruise[j] - transfer;
                let lo = gamma * n * p.delta / m;
                let hi = gamma * n * p.steep / m;
                wanted.clamp(lo, hi)
            }
            _ if n > 0.0 => gamma * n * sol.search.search_partials(n, m)?.dn,
            _ => 0.0,
        };
        tau.push(transfer + search_term);
    }
    if let Some(last) = tau.last_mut() {
        if sol.density.last() == Some(&0.0) {
            *last = 0.0;
        }
    }
    Ok(PriceProfile {
        class,
        xs: sol.xs.clone(),
        tau,
        span: sol.span,
        support_level: support,
    })
}

pub fn optimal_prices(
    scenario: &Scenario,
    av: &SpatialSolution,
    hv: &SpatialSolution,
) -> Result<PricingSchedule> {
    av.require(VehicleClass::Av, Mode::Optimum)?;
    hv.require(VehicleClass::Hv, Mode::Optimum)?;
    let tp_min = total_parking_cost(scenario, av, hv)?;
    let tc = priced_total_cost(scenario, av, hv)?;
    Ok(PricingSchedule {
        av: price_profile(scenario, av)?,
        hv: price_profile(scenario, hv)?,
        tp_min,
        tc,
        net_revenue: tc - tp_min,
    })
}

/// `MP_a N_a + MP_c N_c + TCr`.
pub fn priced_total_cost(scenario: &Scenario, av: &SpatialSolution, hv: &SpatialSolution) -> Result<f64> {
    av.require(VehicleClass::Av, Mode::Optimum)?;
    hv.require(VehicleClass::Hv, Mode::Optimum)?;
    Ok(av.level * scenario.demand(VehicleClass::Av)
        + hv.level * scenario.demand(VehicleClass::Hv)
        + cost::total_cruising_cost(scenario).total)
}

/// `Σ ∫ P_i n_i dx` for any pair of distributions, without price transfers.
/// Cruising enters through its distribution-free total.
pub fn total_parking_cost(scenario: &Scenario, av: &SpatialSolution, hv: &SpatialSolution) -> Result<f64> {
    Ok(cost::access_search_cost(scenario, av)?
        + cost::access_search_cost(scenario, hv)?
        + cost::total_cruising_cost(scenario).total)
}

/// Largest `|P + τ - support| / support` over the span.
pub fn support_flatness(scenario: &Scenario, sol: &SpatialSolution, prices: &PriceProfile) -> Result<f64> {
    let costs = cost::cost_profile(scenario, sol)?;
    let scale = prices.support_level.abs().max(f64::MIN_POSITIVE);
    Ok(costs
        .iter()
        .zip(&prices.tau)
        .map(|(c, t)| (c.total + t - prices.support_level).abs() / scale)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingComparison {
    pub tp_equilibrium: f64,
    pub tp_optimum: f64,
    /// `(TP_eq - TP_min) / TP_eq`.
    pub reduction: f64,
}

pub fn compare(scenario: &Scenario, equilibrium: &CorridorSolution, optimum: &CorridorSolution) -> Result<PricingComparison> {
    let tp_equilibrium = total_parking_cost(scenario, &equilibrium.av, &equilibrium.hv)?;
    let tp_optimum = total_parking_cost(scenario, &optimum.av, &optimum.hv)?;
    Ok(PricingComparison {
        tp_equilibrium,
        tp_optimum,
        reduction: (tp_equilibrium - tp_optimum) / tp_equilibrium,
    })
}

/// Cost saved by moving from the unpriced equilibrium to the priced optimum.
pub fn unpriced_vs_priced_reduction(scenario: &Scenario, exec: Execution) -> Result<PricingComparison> {
    let (eq, opt) = crate::par::join(
        exec,
        || corridor::solve_both(scenario, Mode::Equilibrium, exec),
        || corridor::solve_both(scenario, Mode::Optimum, exec),
    );
    compare(scenario, &eq?, &opt?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corridor::solve_both;
    use crate::presets;
    use crate::scenario::SearchKind;

    #[test]
    fn prices_vanish_at_span_edges_and_flatten_costs() {
        for kind in [SearchKind::Binomial, SearchKind::Piecewise] {
            let s = presets::base(kind, 0.5);
            let opt = solve_both(&s, Mode::Optimum, Execution::Sequential).unwrap();
            let sched = optimal_prices(&s, &opt.av, &opt.hv).unwrap();
            for class in VehicleClass::ALL {
                let p = sched.get(class);
                assert_eq!(*p.tau.last().unwrap(), 0.0);
                assert_eq!(p.at(p.span + 0.1), 0.0);
                let flat = support_flatness(&s, opt.get(class), p).unwrap();
                assert!(flat < 1e-6, "{kind:?} {class}: {flat}");
            }
            assert_eq!(sched.net_revenue, sched.tc - sched.tp_min);
        }
    }

    #[test]
    fn equilibrium_input_is_rejected() {
        let s = presets::base(SearchKind::Binomial, 0.5);
        let eq = solve_both(&s, Mode::Equilibrium, Execution::Sequential).unwrap();
        assert!(optimal_prices(&s, &eq.av, &eq.hv).is_err());
    }

    #[test]
    fn identical_distributions_give_zero_reduction() {
        let s = presets::base(SearchKind::Binomial, 0.5);
        let opt = solve_both(&s, Mode::Optimum, Execution::Sequential).unwrap();
        assert_eq!(compare(&s, &opt, &opt).unwrap().reduction, 0.0);
    }
}
