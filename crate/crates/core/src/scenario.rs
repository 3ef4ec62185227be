//! Problem instances: demand, cost coefficients, the search-time model, the
//! parking supply profile along the corridor and the planning inputs.
//!
//! A [`ScenarioConfig`] mirrors the JSON document one-to-one. [`Scenario`]
//! is the validated, immutable form every solver works from.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::search::{PiecewiseParams, SearchModel};

/// Samples used to check profile invariants and to find the peak HV capacity.
pub const SUPPLY_SAMPLES: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    #[serde(rename = "a")]
    Av,
    #[serde(rename = "c")]
    Hv,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 2] = [VehicleClass::Av, VehicleClass::Hv];

    pub fn tag(self) -> &'static str {
        match self {
            VehicleClass::Av => "a",
            VehicleClass::Hv => "c",
        }
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VehicleClass::Av => "AV",
            VehicleClass::Hv => "HV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    Binomial,
    Piecewise,
}

/// The `search` block. Piecewise parameters may be present for a binomial
/// scenario; the planner's closed forms always read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(rename = "type")]
    pub kind: SearchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
    pub steep: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub x: f64,
    pub k: f64,
    pub theta: f64,
}

/// Parking area per km `k(x)` and AV share of that area `θ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SupplyProfile {
    Constant {
        k: f64,
        theta: f64,
        x_hat: f64,
    },
    /// `θ(x) = eps_cap / (1 + exp(-steepness (x - midpoint)))`, constant `k`.
    Sigmoid {
        k: f64,
        eps_cap: f64,
        steepness: f64,
        midpoint: f64,
        x_hat: f64,
    },
    /// Piecewise-linear in both `k` and `θ`, clamped outside the breakpoints.
    Tabulated {
        breakpoints: Vec<Breakpoint>,
        x_hat: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupplyPoint {
    pub k: f64,
    pub theta: f64,
    pub m_a: f64,
    pub m_c: f64,
}

impl SupplyProfile {
    /// Furthest location with parking supply, `x̂`.
    pub fn span(&self) -> f64 {
        match self {
            SupplyProfile::Constant { x_hat, .. }
            | SupplyProfile::Sigmoid { x_hat, .. }
            | SupplyProfile::Tabulated { x_hat, .. } => *x_hat,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SupplyProfile::Constant { .. })
    }

    /// `(k, θ)` at `x` without a span check.
    pub fn area_and_share(&self, x: f64) -> (f64, f64) {
        match self {
            SupplyProfile::Constant { k, theta, .. } => (*k, *theta),
            SupplyProfile::Sigmoid {
                k,
                eps_cap,
                steepness,
                midpoint,
                ..
            } => (*k, eps_cap / (1.0 + (-steepness * (x - midpoint)).exp())),
            SupplyProfile::Tabulated { breakpoints, .. } => {
                let (j, t) = locate(breakpoints, x);
                let a = &breakpoints[j];
                match breakpoints.get(j + 1) {
                    Some(b) if t > 0.0 => (a.k + t * (b.k - a.k), a.theta + t * (b.theta - a.theta)),
                    _ => (a.k, a.theta),
                }
            }
        }
    }

    /// `(dk/dx, dθ/dx)`; right-sided at tabulated breakpoints.
    pub fn area_and_share_slope(&self, x: f64) -> (f64, f64) {
        match self {
            SupplyProfile::Constant { .. } => (0.0, 0.0),
            SupplyProfile::Sigmoid {
                eps_cap, steepness, ..
            } => {
                let (_, theta) = self.area_and_share(x);
                if *eps_cap == 0.0 {
                    return (0.0, 0.0);
                }
                (0.0, steepness * theta * (1.0 - theta / eps_cap))
            }
            SupplyProfile::Tabulated { breakpoints, .. } => {
                if x < breakpoints[0].x {
                    return (0.0, 0.0);
                }
                let (j, _) = locate(breakpoints, x);
                match breakpoints.get(j + 1) {
                    Some(b) => {
                        let a = &breakpoints[j];
                        let dx = b.x - a.x;
                        ((b.k - a.k) / dx, (b.theta - a.theta) / dx)
                    }
                    None => (0.0, 0.0),
                }
            }
        }
    }

    pub fn supply_at(&self, x: f64, phi: f64) -> Result<SupplyPoint> {
        check_span(x, self.span())?;
        let (k, theta) = self.area_and_share(x);
        Ok(SupplyPoint {
            k,
            theta,
            m_a: theta * k / phi,
            m_c: (1.0 - theta) * k,
        })
    }

    /// Spaces per km for `class` at `x`, no span check.
    pub fn capacity(&self, class: VehicleClass, x: f64, phi: f64) -> f64 {
        let (k, theta) = self.area_and_share(x);
        match class {
            VehicleClass::Av => theta * k / phi,
            VehicleClass::Hv => (1.0 - theta) * k,
        }
    }

    pub fn capacity_slope(&self, class: VehicleClass, x: f64, phi: f64) -> f64 {
        let (k, theta) = self.area_and_share(x);
        let (dk, dtheta) = self.area_and_share_slope(x);
        match class {
            VehicleClass::Av => (dtheta * k + theta * dk) / phi,
            VehicleClass::Hv => (1.0 - theta) * dk - dtheta * k,
        }
    }

    /// `∫₀^x̂ f(k(u), θ(u)) du`, split at tabulated breakpoints so that
    /// Simpson is exact for products of the linear pieces.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let span = self.span();
        let g = |u: f64| {
            let (k, theta) = self.area_and_share(u);
            f(k, theta)
        };
        match self {
            SupplyProfile::Constant { k, theta, .. } => f(*k, *theta) * span,
            SupplyProfile::Sigmoid { .. } => quad::simpson(g, 0.0, span, 4000),
            SupplyProfile::Tabulated { breakpoints, .. } => {
                let mut cuts = vec![0.0];
                cuts.extend(
                    breakpoints
                        .iter()
                        .map(|b| b.x)
                        .filter(|&x| x > 0.0 && x < span),
                );
                cuts.push(span);
                cuts.windows(2)
                    .map(|w| quad::simpson(&g, w[0], w[1], 2))
                    .sum()
            }
        }
    }
}

fn locate(breakpoints: &[Breakpoint], x: f64) -> (usize, f64) {
    let idx = breakpoints.partition_point(|b| b.x <= x);
    if idx == 0 {
        return (0, 0.0);
    }
    let j = idx - 1;
    match breakpoints.get(j + 1) {
        Some(b) => (j, (x - breakpoints[j].x) / (b.x - breakpoints[j].x)),
        None => (j, 0.0),
    }
}

pub(crate) fn check_span(x: f64, span: f64) -> Result<()> {
    let slack = 1e-12 * span.max(1.0);
    if x < -slack || x > span + slack || x.is_nan() {
        Err(Error::OutOfSpan { x, span })
    } else {
        Ok(())
    }
}

/// Land rent per unit area along the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RentProfile {
    /// `L(u) = L0 (1 - u/x̂)`.
    Linear {
        #[serde(rename = "L0")]
        l0: f64,
    },
    Constant {
        #[serde(rename = "L0")]
        l0: f64,
    },
}

impl RentProfile {
    pub fn rent_at(&self, u: f64, span: f64) -> f64 {
        match self {
            RentProfile::Linear { l0 } => l0 * (1.0 - u / span),
            RentProfile::Constant { l0 } => *l0,
        }
    }

    /// `∫₀^x̂ L(u) du`, exact.
    pub fn aggregate(&self, span: f64) -> f64 {
        match self {
            RentProfile::Linear { l0 } => 0.5 * l0 * span,
            RentProfile::Constant { l0 } => l0 * span,
        }
    }

    fn base(&self) -> f64 {
        match self {
            RentProfile::Linear { l0 } | RentProfile::Constant { l0 } => *l0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningParams {
    /// Upgrade cost per unit area of AV parking.
    pub v_a: f64,
    pub rent: RentProfile,
    /// Benchmark (initial) parking area per km.
    pub k_b: f64,
    /// Budget; computed from the benchmark design when absent.
    #[serde(
        rename = "budget",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub budget_override: Option<f64>,
}

pub fn aggregate_rent(planning: &PlanningParams, span: f64) -> f64 {
    planning.rent.aggregate(span)
}

/// The scenario JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "N")]
    pub total_demand: f64,
    pub epsilon: f64,
    pub phi: f64,
    pub lambda_c: f64,
    pub lambda_a: f64,
    pub beta_c: f64,
    pub beta_a: f64,
    pub gamma_c: f64,
    pub gamma_a: f64,
    pub search: SearchConfig,
    pub supply: SupplyProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning: Option<PlanningParams>,
}

/// A validated problem instance. Immutable; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: ScenarioConfig,
    search: SearchModel,
    piecewise: Option<PiecewiseParams>,
    hv_capacity_peak: f64,
    warnings: Vec<String>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        Self::from_config(config)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let mut warnings = Vec::new();
        let c = &config;

        positive("N", c.total_demand)?;
        if !(0.0..=1.0).contains(&c.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        if !(c.phi > 0.0 && c.phi <= 1.0) {
            return Err(Error::invalid("phi", "must lie in (0, 1]"));
        }
        positive("lambda_c", c.lambda_c)?;
        positive("lambda_a", c.lambda_a)?;
        nonnegative("beta_c", c.beta_c)?;
        nonnegative("beta_a", c.beta_a)?;
        positive("gamma_c", c.gamma_c)?;
        positive("gamma_a", c.gamma_a)?;
        if c.gamma_a > c.gamma_c {
            return Err(Error::invalid("gamma_a", "must not exceed gamma_c"));
        }
        if c.beta_a > c.beta_c {
            return Err(Error::invalid("beta_a", "must not exceed beta_c"));
        }
        if c.lambda_c <= c.lambda_a {
            warnings.push(format!(
                "lambda_c = {} does not exceed lambda_a = {}; HV walking is expected to cost more than AV self-driving",
                c.lambda_c, c.lambda_a
            ));
        }

        let piecewise = piecewise_params(&c.search)?;
        let search = match c.search.kind {
            SearchKind::Binomial => SearchModel::Binomial,
            SearchKind::Piecewise => {
                SearchModel::Piecewise(piecewise.ok_or_else(|| {
                    Error::invalid("search.delta", "piecewise search needs delta, Delta and omega")
                })?)
            }
        };

        validate_supply(&c.supply)?;
        let span = c.supply.span();
        let hv_capacity_peak = quad::linspace(0.0, span, SUPPLY_SAMPLES)
            .into_iter()
            .map(|x| c.supply.capacity(VehicleClass::Hv, x, c.phi))
            .fold(0.0_f64, f64::max);
        // Keeps HVs preferring inward parking: λ_c > β_c n_c for every feasible n_c ≤ m_c.
        if c.beta_c * hv_capacity_peak >= c.lambda_c {
            return Err(Error::invalid(
                "beta_c",
                format!(
                    "must be below lambda_c / max m_c = {:e}",
                    c.lambda_c / hv_capacity_peak
                ),
            ));
        }

        if let Some(p) = &c.planning {
            nonnegative("planning.v_a", p.v_a)?;
            positive("planning.k_b", p.k_b)?;
            nonnegative("planning.rent.L0", p.rent.base())?;
            if let Some(b) = p.budget_override {
                positive("planning.budget", b)?;
            }
        }

        Ok(Scenario {
            config,
            search,
            piecewise,
            hv_capacity_peak,
            warnings,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn total_demand(&self) -> f64 {
        self.config.total_demand
    }

    pub fn penetration(&self) -> f64 {
        self.config.epsilon
    }

    pub fn phi(&self) -> f64 {
        self.config.phi
    }

    /// `N_a = εN`, `N_c = (1-ε)N`.
    pub fn demand(&self, class: VehicleClass) -> f64 {
        let c = &self.config;
        match class {
            VehicleClass::Av => c.epsilon * c.total_demand,
            VehicleClass::Hv => (1.0 - c.epsilon) * c.total_demand,
        }
    }

    /// Walking cost (HV) or self-driving cost (AV) per km.
    pub fn distance_cost(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Av => self.config.lambda_a,
            VehicleClass::Hv => self.config.lambda_c,
        }
    }

    pub fn cruise_coeff(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Av => self.config.beta_a,
            VehicleClass::Hv => self.config.beta_c,
        }
    }

    pub fn search_value(&self, class: VehicleClass) -> f64 {
        match class {
            VehicleClass::Av => self.config.gamma_a,
            VehicleClass::Hv => self.config.gamma_c,
        }
    }

    pub fn search(&self) -> SearchModel {
        self.search
    }

    /// Piecewise parameters if configured, regardless of the active model.
    pub fn piecewise(&self) -> Option<PiecewiseParams> {
        self.piecewise
    }

    pub fn supply(&self) -> &SupplyProfile {
        &self.config.supply
    }

    pub fn supply_span(&self) -> f64 {
        self.config.supply.span()
    }

    pub fn supply_at(&self, x: f64) -> Result<SupplyPoint> {
        self.config.supply.supply_at(x, self.config.phi)
    }

    pub fn capacity(&self, class: VehicleClass, x: f64) -> f64 {
        self.config.supply.capacity(class, x, self.config.phi)
    }

    pub fn capacity_slope(&self, class: VehicleClass, x: f64) -> f64 {
        self.config.supply.capacity_slope(class, x, self.config.phi)
    }

    /// Largest HV space count on the sampled supply profile.
    pub fn hv_capacity_peak(&self) -> f64 {
        self.hv_capacity_peak
    }

    pub fn planning(&self) -> Result<&PlanningParams> {
        self.config.planning.as_ref().ok_or(Error::MissingPlanning)
    }

    /// Same scenario, different active search model.
    pub fn with_search(&self, kind: SearchKind) -> Result<Self> {
        let mut config = self.config.clone();
        config.search.kind = kind;
        Self::from_config(config)
    }

    pub fn with_penetration(&self, epsilon: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.epsilon = epsilon;
        Self::from_config(config)
    }

    pub fn with_supply(&self, supply: SupplyProfile) -> Result<Self> {
        let mut config = self.config.clone();
        config.supply = supply;
        Self::from_config(config)
    }

    /// Same scenario with `β_a = β_c = 0`.
    pub fn without_cruising(&self) -> Self {
        let mut config = self.config.clone();
        config.beta_a = 0.0;
        config.beta_c = 0.0;
        Self::from_config(config).expect("dropping cruising keeps a valid scenario valid")
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(field: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be nonnegative and finite, got {v}")))
    }
}

fn piecewise_params(search: &SearchConfig) -> Result<Option<PiecewiseParams>> {
    let (delta, steep, omega) = match (search.delta, search.steep, search.omega) {
        (None, None, None) => return Ok(None),
        (Some(d), Some(s), Some(o)) => (d, s, o),
        _ => {
            return Err(Error::invalid(
                "search",
                "delta, Delta and omega must be given together",
            ))
        }
    };
    positive("search.delta", delta)?;
    positive("search.Delta", steep)?;
    if steep <= delta {
        return Err(Error::invalid("search.Delta", "must exceed delta"));
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::invalid("search.omega", "must lie in (0, 1)"));
    }
    Ok(Some(PiecewiseParams {
        delta,
        steep,
        headroom: omega,
    }))
}

fn validate_supply(supply: &SupplyProfile) -> Result<()> {
    positive("supply.x_hat", supply.span())?;
    match supply {
        SupplyProfile::Constant { k, theta, .. } => {
            positive("supply.k", *k)?;
            if !(0.0..=1.0).contains(theta) {
                return Err(Error::invalid("supply.theta", format!("{theta} is outside [0, 1]")));
            }
        }
        SupplyProfile::Sigmoid {
            k,
            eps_cap,
            steepness,
            midpoint,
            ..
        } => {
            positive("supply.k", *k)?;
            if !(0.0..=1.0).contains(eps_cap) {
                return Err(Error::invalid("supply.eps_cap", "must lie in [0, 1]"));
            }
            if !steepness.is_finite() {
                return Err(Error::invalid("supply.steepness", "must be finite"));
            }
            if !midpoint.is_finite() {
                return Err(Error::invalid("supply.midpoint", "must be finite"));
            }
        }
        SupplyProfile::Tabulated { breakpoints, .. } => {
            if breakpoints.is_empty() {
                return Err(Error::invalid("supply.breakpoints", "needs at least one point"));
            }
            if breakpoints.windows(2).any(|w| !(w[1].x > w[0].x)) {
                return Err(Error::invalid(
                    "supply.breakpoints",
                    "x must be strictly increasing",
                ));
            }
            for b in breakpoints {
                positive("supply.k", b.k)?;
                if !(0.0..=1.0).contains(&b.theta) {
                    return Err(Error::invalid(
                        "supply.theta",
                        format!("{} is outside [0, 1]", b.theta),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Whether the supply span holds strictly more spaces than each class needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupplyReport {
    pub av_spaces: f64,
    pub hv_spaces: f64,
    pub av_margin: f64,
    pub hv_margin: f64,
    pub av_ok: bool,
    pub hv_ok: bool,
}

impl SupplyReport {
    pub fn feasible(&self) -> bool {
        self.av_ok && self.hv_ok
    }
}

pub fn check_supply_sufficiency(scenario: &Scenario) -> SupplyReport {
    let phi = scenario.phi();
    let supply = scenario.supply();
    let av_spaces = supply.integrate(|k, theta| theta * k / phi);
    let hv_spaces = supply.integrate(|k, theta| (1.0 - theta) * k);
    let av_margin = av_spaces - scenario.demand(VehicleClass::Av);
    let hv_margin = hv_spaces - scenario.demand(VehicleClass::Hv);
    SupplyReport {
        av_spaces,
        hv_spaces,
        av_margin,
        hv_margin,
        av_ok: av_margin > 0.0,
        hv_ok: hv_margin > 0.0,
    }
}
