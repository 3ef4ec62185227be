//! Spatial parking equilibria and system optima for a corridor shared by
//! autonomous and human-driven vehicles, with location-dependent pricing and
//! a planner for AV parking supply.

pub mod corridor;
pub mod cost;
pub mod error;
pub mod oracle;
pub mod output;
pub mod par;
pub mod planner;
pub mod presets;
pub mod pricing;
pub mod quad;
pub mod scenario;
pub mod search;
pub mod verify;

pub use corridor::{CorridorSolution, Mode, SpatialSolution};
pub use error::{Error, Result};
pub use par::Execution;
pub use scenario::{
    check_supply_sufficiency, load_scenario, Scenario, ScenarioConfig, SearchKind, SupplyProfile,
    VehicleClass,
};
pub use search::{PiecewiseParams, SearchModel};
