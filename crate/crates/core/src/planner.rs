//! Upper-level supply planning: how wide to make the parking strip and what
//! share of it to convert to AV spaces, under an infrastructure budget.
//!
//! All designs are constant along the corridor and evaluated with the
//! piecewise closed-form total cost
//! `TC = C(ε) + N²/(k(1-ω)) · (λ_c(1-ε)²/(1-θ) + φλ_a ε²/θ)`.

use serde::Serialize;

use crate::cost::planning_constant;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::scenario::{Scenario, VehicleClass};

/// Relative slack when comparing infrastructure cost against the budget,
/// so that the benchmark design itself counts as affordable.
const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Benchmark,
    FirstBest,
    SecondBest,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Design {
    pub theta: f64,
    pub k: f64,
    pub kind: DesignKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignEval {
    pub design: Design,
    pub tc: f64,
    pub np: f64,
    pub budget: f64,
    pub within_budget: bool,
    /// Strictly more spaces than demand for both classes.
    pub supply_ok: bool,
    pub feasible: bool,
    /// `(TC^b - TC) / TC^b`.
    pub reduction: f64,
}

/// Planning inputs at one penetration rate.
#[derive(Debug, Clone, Copy)]
struct Ulp {
    eps: f64,
    n: f64,
    phi: f64,
    lambda_c: f64,
    lambda_a: f64,
    mu: f64,
    c_eps: f64,
    headroom: f64,
    v_a: f64,
    x_hat: f64,
    rent: f64,
    k_b: f64,
    budget: f64,
}

impl Ulp {
    fn new(scenario: &Scenario) -> Result<Self> {
        let planning = scenario.planning()?;
        let p = scenario.piecewise().ok_or(Error::MissingPiecewise)?;
        let cfg = scenario.config();
        let x_hat = scenario.supply_span();
        let mut ulp = Ulp {
            eps: cfg.epsilon,
            n: cfg.total_demand,
            phi: cfg.phi,
            lambda_c: cfg.lambda_c,
            lambda_a: cfg.lambda_a,
            mu: cfg.lambda_a / cfg.lambda_c,
            c_eps: planning_constant(scenario)?,
            headroom: p.kink(),
            v_a: planning.v_a,
            x_hat,
            rent: planning.rent.aggregate(x_hat),
            k_b: planning.k_b,
            budget: 0.0,
        };
        ulp.budget = match planning.budget_override {
            Some(b) => b,
            None => ulp.k_b * (ulp.v_a * ulp.theta_b() * ulp.x_hat + ulp.rent),
        };
        Ok(ulp)
    }

    fn theta_b(&self) -> f64 {
        let a = self.eps * self.phi;
        if a == 0.0 {
            0.0
        } else {
            a / (a + 1.0 - self.eps)
        }
    }

    fn tc(&self, theta: f64, k: f64) -> Result<f64> {
        let hv = if self.eps < 1.0 {
            if theta >= 1.0 {
                return Err(Error::InfeasibleDesign(format!(
                    "theta = {theta} leaves no HV spaces"
                )));
            }
            self.lambda_c * (1.0 - self.eps).powi(2) / (1.0 - theta)
        } else {
            0.0
        };
        let av = if self.eps > 0.0 {
            if theta <= 0.0 {
                return Err(Error::InfeasibleDesign(format!(
                    "theta = {theta} leaves no AV spaces"
                )));
            }
            self.phi * self.lambda_a * self.eps * self.eps / theta
        } else {
            0.0
        };
        Ok(self.c_eps + self.n * self.n / (k * self.headroom) * (hv + av))
    }

    fn np(&self, theta: f64, k: f64) -> f64 {
        k * (self.v_a * theta * self.x_hat + self.rent)
    }

    fn theta_first(&self) -> Result<f64> {
        if self.rent <= 0.0 {
            return Err(Error::invalid(
                "planning.rent.L0",
                "the first-best share needs positive aggregate rent",
            ));
        }
        let r = (self.mu * self.phi).sqrt() * self.eps;
        let ratio = ((self.rent + self.v_a * self.x_hat) / self.rent).sqrt();
        Ok(share(r, (1.0 - self.eps) * ratio))
    }

    fn theta_second(&self) -> f64 {
        share((self.mu * self.phi).sqrt() * self.eps, 1.0 - self.eps)
    }

    fn first_best(&self) -> Result<Design> {
        let theta = self.theta_first()?;
        Ok(Design {
            theta,
            k: self.budget / (self.v_a * theta * self.x_hat + self.rent),
            kind: DesignKind::FirstBest,
        })
    }

    fn second_best(&self) -> Design {
        Design {
            theta: self.theta_second(),
            k: self.k_b,
            kind: DesignKind::SecondBest,
        }
    }

    fn benchmark(&self) -> Design {
        Design {
            theta: self.theta_b(),
            k: self.k_b,
            kind: DesignKind::Benchmark,
        }
    }

    fn reductions(&self) -> Result<Reductions> {
        let b = self.benchmark();
        let tc_b = self.tc(b.theta, b.k)?;
        let f = self.first_best()?;
        let tc_1 = self.tc(f.theta, f.k)?;
        let s = self.second_best();
        let tc_2 = self.tc(s.theta, s.k)?;
        Ok(Reductions {
            first_best: (tc_b - tc_1) / tc_b,
            second_best: (tc_b - tc_2) / tc_b,
            second_to_first: (tc_2 - tc_1) / tc_2,
        })
    }

    fn bound_54(&self) -> f64 {
        let upgrade = self.v_a * self.x_hat * self.theta_b();
        upgrade / (self.rent + upgrade)
    }
}

fn share(av: f64, hv: f64) -> f64 {
    if av == 0.0 {
        0.0
    } else {
        av / (av + hv)
    }
}

fn ulp_at(scenario: &Scenario, eps: f64) -> Result<Ulp> {
    if eps == scenario.penetration() {
        return Ulp::new(scenario);
    }
    Ulp::new(&scenario.with_penetration(eps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Benchmark {
    pub design: Design,
    pub budget: f64,
}

/// AV share proportional to the area each class needs, at the benchmark width.
pub fn benchmark_design(scenario: &Scenario) -> Result<Benchmark> {
    let ulp = Ulp::new(scenario)?;
    Ok(Benchmark {
        design: ulp.benchmark(),
        budget: ulp.budget,
    })
}

pub fn budget(scenario: &Scenario) -> Result<f64> {
    Ok(Ulp::new(scenario)?.budget)
}

/// `k (v_a θ x̂ + L)` for a constant design.
pub fn infrastructure_cost(scenario: &Scenario, theta: f64, k: f64) -> Result<f64> {
    Ok(Ulp::new(scenario)?.np(theta, k))
}

/// `∫₀^x̂ k(x)(v_a θ(x) + L(x)) dx` for the scenario's own supply profile.
pub fn profile_infrastructure_cost(scenario: &Scenario) -> Result<f64> {
    let planning = scenario.planning()?;
    let supply = scenario.supply();
    let span = supply.span();
    let rent = planning.rent;
    let upgrade = supply.integrate(|k, theta| k * planning.v_a * theta);
    let area_rent = crate::quad::simpson(
        |u| supply.area_and_share(u).0 * rent.rent_at(u, span),
        0.0,
        span,
        4000,
    );
    Ok(upgrade + area_rent)
}

pub fn tc_closed_form(scenario: &Scenario, design: Design) -> Result<DesignEval> {
    let ulp = Ulp::new(scenario)?;
    evaluate(&ulp, design, ulp.tc(ulp.theta_b(), ulp.k_b)?)
}

fn evaluate(ulp: &Ulp, design: Design, tc_benchmark: f64) -> Result<DesignEval> {
    if !(0.0..=1.0).contains(&design.theta) || !(design.k > 0.0) {
        return Err(Error::InfeasibleDesign(format!(
            "theta = {} and k = {} are outside theta in [0, 1], k > 0",
            design.theta, design.k
        )));
    }
    let tc = ulp.tc(design.theta, design.k)?;
    let np = ulp.np(design.theta, design.k);
    let within_budget = np <= ulp.budget * (1.0 + BUDGET_SLACK);
    let av_need = ulp.eps * ulp.n;
    let hv_need = (1.0 - ulp.eps) * ulp.n;
    let av_spaces = design.theta * design.k * ulp.x_hat / ulp.phi;
    let hv_spaces = (1.0 - design.theta) * design.k * ulp.x_hat;
    let supply_ok = (av_need == 0.0 || av_spaces > av_need) && (hv_need == 0.0 || hv_spaces > hv_need);
    Ok(DesignEval {
        design,
        tc,
        np,
        budget: ulp.budget,
        within_budget,
        supply_ok,
        feasible: within_budget && supply_ok,
        reduction: (tc_benchmark - tc) / tc_benchmark,
    })
}

/// Budget-constrained optimum with free width.
pub fn first_best(scenario: &Scenario) -> Result<Design> {
    Ulp::new(scenario)?.first_best()
}

/// Optimum share with the width held at the benchmark.
pub fn second_best(scenario: &Scenario) -> Result<Design> {
    Ok(Ulp::new(scenario)?.second_best())
}

/// Minimized first-best cost,
/// `C(ε) + λ_c (√L(1-ε) + √((v_a x̂ + L)μφ) ε)² N² / ((1-ω) budget)`.
pub fn first_best_cost(scenario: &Scenario) -> Result<f64> {
    let u = Ulp::new(scenario)?;
    let inner = u.rent.sqrt() * (1.0 - u.eps) + ((u.v_a * u.x_hat + u.rent) * u.mu * u.phi).sqrt() * u.eps;
    Ok(u.c_eps + u.lambda_c * inner * inner * u.n * u.n / (u.headroom * u.budget))
}

/// Minimized second-best cost, `C(ε) + N² λ_c ((1-ε) + √(μφ) ε)² / (k_b (1-ω))`.
pub fn second_best_cost(scenario: &Scenario) -> Result<f64> {
    let u = Ulp::new(scenario)?;
    let inner = (1.0 - u.eps) + (u.mu * u.phi).sqrt() * u.eps;
    Ok(u.c_eps + u.n * u.n * u.lambda_c * inner * inner / (u.k_b * u.headroom))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reductions {
    /// Benchmark to first-best.
    pub first_best: f64,
    /// Benchmark to second-best.
    pub second_best: f64,
    /// Second-best to first-best.
    pub second_to_first: f64,
}

pub fn reductions(scenario: &Scenario) -> Result<Reductions> {
    Ulp::new(scenario)?.reductions()
}

pub fn reductions_at(scenario: &Scenario, eps: f64) -> Result<Reductions> {
    ulp_at(scenario, eps)?.reductions()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub epsilon: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionBounds {
    /// Upper bound on the benchmark-to-first-best reduction.
    pub l52: f64,
    /// Upper bound on the benchmark-to-second-best reduction.
    pub l53: f64,
    /// Upper bound on the second-to-first-best reduction at this penetration.
    pub l54: f64,
    /// Penetration maximizing the `l52` relaxation.
    pub critical_52: f64,
    /// Penetration maximizing the `l53` relaxation.
    pub critical_53: f64,
    pub peak_first_best: Peak,
    pub peak_second_best: Peak,
    pub peak_second_to_first: Peak,
}

/// Penetration grid used to locate the largest exact reductions.
pub fn penetration_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

pub fn reduction_bounds(scenario: &Scenario) -> Result<ReductionBounds> {
    let u = Ulp::new(scenario)?;
    let growth = (u.v_a * u.x_hat + u.rent) / u.rent;
    let (sp, sm) = (u.phi.sqrt(), u.mu.sqrt());
    let (wide, narrow) = ((u.v_a * u.x_hat + u.rent).sqrt() * sp, u.rent.sqrt() * sm);
    let ratio = |a: f64, b: f64| ((a - b) / (a + b)).powi(2);

    let grid = penetration_grid();
    let curve = grid
        .iter()
        .map(|&e| Ok((e, ulp_at(scenario, e)?.reductions()?)))
        .collect::<Result<Vec<_>>>()?;
    let peak = |pick: fn(&Reductions) -> f64| {
        curve
            .iter()
            .map(|(e, r)| Peak {
                epsilon: *e,
                value: pick(r),
            })
            .fold(
                Peak {
                    epsilon: f64::NAN,
                    value: f64::NEG_INFINITY,
                },
                |best, p| if p.value > best.value { p } else { best },
            )
    };
    Ok(ReductionBounds {
        l52: ratio(wide, narrow),
        l53: ratio(sp, sm),
        l54: u.bound_54(),
        critical_52: 1.0 / (1.0 + (growth * u.phi * u.mu).sqrt()),
        critical_53: 1.0 / (1.0 + (u.phi * u.mu).sqrt()),
        peak_first_best: peak(|r| r.first_best),
        peak_second_best: peak(|r| r.second_best),
        peak_second_to_first: peak(|r| r.second_to_first),
    })
}

/// The `l54` bound at another penetration.
pub fn bound_54_at(scenario: &Scenario, eps: f64) -> Result<f64> {
    Ok(ulp_at(scenario, eps)?.bound_54())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetSaving {
    pub amount: f64,
    pub fraction: f64,
}

/// Budget left unspent by the second-best design: `k_b v_a (θ^b - θ^{o2}) x̂`.
pub fn budget_saving(scenario: &Scenario) -> Result<BudgetSaving> {
    let u = Ulp::new(scenario)?;
    let amount = u.k_b * u.v_a * (u.theta_b() - u.theta_second()) * u.x_hat;
    Ok(BudgetSaving {
        amount,
        fraction: amount / u.budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub thetas: Vec<f64>,
    pub ks: Vec<f64>,
    /// Row-major: `cells[i * ks.len() + j]` is `(thetas[i], ks[j])`.
    pub cells: Vec<DesignEval>,
    /// Cheapest feasible cell as `(theta index, k index)`.
    pub argmin: Option<(usize, usize)>,
}

impl SweepTable {
    pub fn cell(&self, i: usize, j: usize) -> &DesignEval {
        &self.cells[i * self.ks.len() + j]
    }
}

/// Evaluates every `(θ, k)` cell. Pole cells (no space for a class with
/// demand) get infinite cost and are infeasible.
pub fn sweep(scenario: &Scenario, thetas: &[f64], ks: &[f64], exec: Execution) -> Result<SweepTable> {
    if thetas.is_empty() || ks.is_empty() {
        return Err(Error::invalid("sweep", "grids must be nonempty"));
    }
    if thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::invalid("sweep.theta", "values must lie in [0, 1]"));
    }
    if ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("sweep.k", "values must be positive"));
    }
    let ulp = Ulp::new(scenario)?;
    let tc_b = ulp.tc(ulp.theta_b(), ulp.k_b)?;
    let cols = ks.len();
    let cells = par::map_range(thetas.len() * cols, exec, |idx| {
        let design = Design {
            theta: thetas[idx / cols],
            k: ks[idx % cols],
            kind: DesignKind::Sweep,
        };
        evaluate(&ulp, design, tc_b).unwrap_or_else(|_| DesignEval {
            design,
            tc: f64::INFINITY,
            np: ulp.np(design.theta, design.k),
            budget: ulp.budget,
            within_budget: false,
            supply_ok: false,
            feasible: false,
            reduction: f64::NEG_INFINITY,
        })
    });
    let argmin = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.feasible && c.tc.is_finite())
        .fold(None::<(usize, f64)>, |best, (i, c)| match best {
            Some((_, tc)) if tc <= c.tc => best,
            _ => Some((i, c.tc)),
        })
        .map(|(i, _)| (i / cols, i % cols));
    Ok(SweepTable {
        thetas: thetas.to_vec(),
        ks: ks.to_vec(),
        cells,
        argmin,
    })
}

/// Class demands and spaces at a constant design, for reporting.
pub fn design_spaces(scenario: &Scenario, design: Design) -> [(VehicleClass, f64, f64); 2] {
    let x_hat = scenario.supply_span();
    [
        (
            VehicleClass::Av,
            scenario.demand(VehicleClass::Av),
            design.theta * design.k * x_hat / scenario.phi(),
        ),
        (
            VehicleClass::Hv,
            scenario.demand(VehicleClass::Hv),
            (1.0 - design.theta) * design.k * x_hat,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::scenario::SearchKind;

    fn base() -> Scenario {
        presets::base(SearchKind::Piecewise, 0.5)
    }

    #[test]
    fn benchmark_share_and_budget() {
        let b = benchmark_design(&base()).unwrap();
        assert!((b.design.theta - 0.32 / 0.92).abs() < 1e-12);
        assert!((b.budget - 40000.0 * (50.0 * 0.32 / 0.92 * 5.0 + 500.0)).abs() < 1e-6);
        let zero = base().with_penetration(0.0).unwrap();
        assert_eq!(benchmark_design(&zero).unwrap().design.theta, 0.0);
    }

    #[test]
    fn benchmark_cost() {
        let s = base();
        let b = benchmark_design(&s).unwrap();
        let e = tc_closed_form(&s, b.design).unwrap();
        let expected = 31200.0 + 12500.0 * (1.44 / (0.6 / 0.92) + 0.064 / (0.32 / 0.92));
        assert!((e.tc - expected).abs() < 1e-6);
        assert!((e.tc - 61100.0).abs() < 1.0);
        assert_eq!(e.reduction, 0.0);
        assert!(e.feasible);
    }

    #[test]
    fn edge_penetrations() {
        let one = base().with_penetration(1.0).unwrap();
        assert!((first_best(&one).unwrap().theta - 1.0).abs() < 1e-15);
        let zero = base().with_penetration(0.0).unwrap();
        assert_eq!(second_best(&zero).unwrap().theta, 0.0);
        assert_eq!(budget_saving(&zero).unwrap().amount, 0.0);
    }

    #[test]
    fn symmetric_costs_give_penetration_share() {
        let mut cfg = presets::base_config(SearchKind::Piecewise, 0.5);
        // μφ = 1; λ_a > λ_c only triggers a warning.
        cfg.lambda_a = cfg.lambda_c / cfg.phi;
        let s = Scenario::from_config(cfg).unwrap();
        assert!(!s.warnings().is_empty());
        assert!((second_best(&s).unwrap().theta - 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_rent_is_a_configuration_error() {
        let mut cfg = presets::base_config(SearchKind::Piecewise, 0.5);
        cfg.planning.as_mut().unwrap().rent = crate::scenario::RentProfile::Linear { l0: 0.0 };
        let s = Scenario::from_config(cfg).unwrap();
        assert!(matches!(first_best(&s), Err(Error::Invalid { .. })));
    }

    #[test]
    fn pole_designs_are_rejected() {
        let s = base();
        for theta in [0.0, 1.0] {
            let d = Design {
                theta,
                k: 40000.0,
                kind: DesignKind::Sweep,
            };
            assert!(matches!(tc_closed_form(&s, d), Err(Error::InfeasibleDesign(_))));
        }
    }

    #[test]
    fn free_upgrades_collapse_first_best_onto_second_best() {
        let mut cfg = presets::base_config(SearchKind::Piecewise, 0.5);
        cfg.planning.as_mut().unwrap().v_a = 1e-9;
        let s = Scenario::from_config(cfg).unwrap();
        let f = first_best(&s).unwrap();
        let sb = second_best(&s).unwrap();
        assert!((f.theta - sb.theta).abs() < 1e-9);
        assert!((f.k - 40000.0).abs() < 1e-3);
        assert!(budget_saving(&s).unwrap().amount.abs() < 1e-3);
    }

    #[test]
    fn sweep_marks_tiny_budgets_infeasible() {
        let mut cfg = presets::base_config(SearchKind::Piecewise, 0.5);
        cfg.planning.as_mut().unwrap().budget_override = Some(1.0);
        let s = Scenario::from_config(cfg).unwrap();
        let t = sweep(&s, &[0.2, 0.5], &[1000.0, 2000.0], Execution::Sequential).unwrap();
        assert!(t.argmin.is_none());
        assert!(t.cells.iter().all(|c| !c.feasible));
    }

    #[test]
    fn sweep_execution_modes_agree() {
        let s = base();
        let thetas = crate::quad::linspace(0.0, 1.0, 41);
        let ks = crate::quad::linspace(5000.0, 60000.0, 37);
        let a = sweep(&s, &thetas, &ks, Execution::Sequential).unwrap();
        let b = sweep(&s, &thetas, &ks, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.cell(0, 0).tc.is_infinite());
        assert!(!a.cell(40, 3).feasible);
    }

    #[test]
    fn constant_profile_infrastructure_matches_formula() {
        let s = presets::base(SearchKind::Binomial, 0.25);
        let np = profile_infrastructure_cost(&s).unwrap();
        let closed = infrastructure_cost(&s, 0.25, 40000.0).unwrap();
        assert!((np - closed).abs() < 1e-6 * closed);
        assert!((closed - 2.25e7).abs() < 1.0);
    }
}
