use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::VehicleClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("location {x} km is outside [0, {span}]")]
    OutOfSpan { x: f64, span: f64 },

    #[error("scenario has no `planning` block")]
    MissingPlanning,

    #[error("operation needs piecewise search parameters (`delta`, `Delta`, `omega`)")]
    MissingPiecewise,

    #[error("search time undefined at n = {n}, m = {m}: {reason}")]
    SearchDomain { n: f64, m: f64, reason: &'static str },

    #[error("{class} demand {demand} exceeds the attainable mass {max_mass} on the supply span")]
    SupplyInfeasible {
        class: VehicleClass,
        demand: f64,
        max_mass: f64,
    },

    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("degenerate search model: marginal-cost curvature vanishes at x = {x}")]
    DegenerateSearchModel { x: f64 },

    #[error("outside model domain: {0}")]
    ModelDomain(String),

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("expected a {expected} solution")]
    WrongMode { expected: &'static str },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse(_)
            | Error::Invalid { .. }
            | Error::MissingPlanning
            | Error::MissingPiecewise
            | Error::ModelDomain(_)
            | Error::InfeasibleDesign(_)
            | Error::WrongMode { .. }
            | Error::OutOfSpan { .. } => 1,
            Error::NonConvergence { .. }
            | Error::DegenerateSearchModel { .. }
            | Error::SearchDomain { .. } => 2,
            Error::SupplyInfeasible { .. } => 3,
        }
    }
}
