//! Analytic delivery-ratio, latency and jitter model for reliable
//! publish/subscribe over lossy links, plus a discrete-event simulator to
//! check it against.

pub mod error;
pub mod latency;
pub mod model;
pub mod operators;
pub mod reference;
pub mod sim;
pub mod steady_state;

pub use error::{Error, Result};
pub use latency::{analyze, Analysis, OffsetCase, OffsetModel, PhaseLatency};
pub use model::{
    derive_params, validate_scenario, DerivedParams, JitterMode, LatencyMetrics, ScenarioParams, Severity,
    SolverConfig, TimelineMode, UnackedDistribution, ValidationReport,
};
pub use reference::{ErrorSummary, ReferenceRow};
pub use sim::{run_sim, SimConfig, SimResult};
pub use steady_state::{solve_steady_state, SteadyStateCycle};
