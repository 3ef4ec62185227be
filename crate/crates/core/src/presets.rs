//! Reference instances used by the examples, tests and the `reference` command.

use crate::scenario::{
    PlanningParams, RentProfile, Scenario, ScenarioConfig, SearchConfig, SearchKind,
    SupplyProfile,
};

pub const BASE_K: f64 = 40000.0;
pub const BASE_SPAN: f64 = 5.0;
pub const SIGMOID_CAP: f64 = 0.4;
pub const SIGMOID_STEEPNESS: f64 = 4.0;
pub const SIGMOID_MIDPOINT: f64 = 5.0 / 6.0;

/// The 20 000-trip, 40 % penetration corridor with constant AV share `theta`.
pub fn base_config(kind: SearchKind, theta: f64) -> ScenarioConfig {
    ScenarioConfig {
        total_demand: 20000.0,
        epsilon: 0.4,
        phi: 0.8,
        lambda_c: 4.0,
        lambda_a: 0.5,
        beta_c: 1e-4,
        beta_a: 0.5e-4,
        gamma_c: 0.1,
        gamma_a: 0.05,
        search: SearchConfig {
            kind,
            delta: Some(10.0),
            steep: Some(1000.0),
            omega: Some(0.2),
        },
        supply: SupplyProfile::Constant {
            k: BASE_K,
            theta,
            x_hat: BASE_SPAN,
        },
        planning: Some(PlanningParams {
            v_a: 50.0,
            rent: RentProfile::Linear { l0: 200.0 },
            k_b: BASE_K,
            budget_override: None,
        }),
    }
}

pub fn base(kind: SearchKind, theta: f64) -> Scenario {
    Scenario::from_config(base_config(kind, theta)).expect("reference scenario is valid")
}

/// AV share rising from the downtown edge along a logistic curve.
pub fn sigmoid_config(kind: SearchKind) -> ScenarioConfig {
    let mut cfg = base_config(kind, 0.0);
    cfg.supply = SupplyProfile::Sigmoid {
        k: BASE_K,
        eps_cap: SIGMOID_CAP,
        steepness: SIGMOID_STEEPNESS,
        midpoint: SIGMOID_MIDPOINT,
        x_hat: BASE_SPAN,
    };
    cfg
}

pub fn sigmoid(kind: SearchKind) -> Scenario {
    Scenario::from_config(sigmoid_config(kind)).expect("reference scenario is valid")
}
