//! Distances between states and closeness of hybrid arcs.

mod closeness;
pub(crate) mod optimize;
pub(crate) mod rho;
mod sweep;

use thiserror::Error;

pub use closeness::{
    default_search_window, graphical_eps, graphical_profile, rho_eps, rho_trace, ClosenessProfile,
    ClosenessReport, GraphicalOptions, RhoTrace, TailPoint, TracePoint, Witness, DEFAULT_GRID_STEP,
};
pub use rho::{rho_a, rho_a_oracle, Branch, BranchValues, DistanceReport, OracleGrid, OracleTable, OracleValue};
pub use sweep::{stability_sweep, RadiusSummary, StabilityReport, SweepParams, TailRow, Verdicts};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("state has non-finite entries")]
    NonFinite,
    #[error("invalid oracle grid")]
    InvalidGrid,
    #[error("oracle grid contains no point of the state space")]
    EmptyGrid,
    #[error("arcs have disjoint time ranges")]
    DisjointTimeRanges,
    #[error("tail start {t_start} is beyond the comparable horizon {horizon}")]
    TailBeyondHorizon { t_start: f64, horizon: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("malformed sweep table: {0}")]
    Table(String),
}
