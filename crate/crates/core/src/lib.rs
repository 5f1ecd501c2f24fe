//! Simulation of hybrid systems `ẋ = F(t, x), x ∈ C;  x⁺ = G(x), x ∈ D` and
//! analysis of their solutions: the distance `ρ_𝒜` between state pairs,
//! graphical and ρ_𝒜 closeness of solutions, stability sweeps, and
//! sampling-based checks of the structural conditions linking the two
//! stability notions.
//!
//! Everything is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the `*64` aliases fix it to `f64`.

pub mod arc;
pub mod catalog;
pub mod domain;
pub mod example;
pub mod hypotheses;
pub mod metrics;
pub mod scalar;
pub mod simulator;
pub mod state;
pub mod system;

pub use arc::{arc_slice_at_time, arc_state_at, ArcFlags, ArcSample, HybridArc, JumpRecord, TerminationReason};
pub use domain::{validate_domain, DomainSegment, DomainViolation, HybridTime, HybridTimeDomain};
pub use scalar::Scalar;
pub use simulator::{flow_until_event, locate_event, simulate, simulate_reversed, IntegratorConfig, SimError};
pub use state::StateVector;
pub use system::{JumpSetChart, SetBound, SystemBuilder, SystemSpec};

pub type State64 = StateVector<f64>;
pub type System64 = SystemSpec<f64>;
pub type Arc64 = HybridArc<f64>;
pub type Config64 = IntegratorConfig<f64>;
pub type DistanceReport64 = metrics::DistanceReport<f64>;
pub type ClosenessReport64 = metrics::ClosenessReport<f64>;
pub type StabilityReport64 = metrics::StabilityReport<f64>;
pub type HypothesisReport64 = hypotheses::HypothesisReport<f64>;
pub type ExampleParams64 = example::ExampleParams<f64>;
