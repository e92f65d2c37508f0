//! Scenario runner, trace generator and metrics reporter.

pub mod experiments;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod trace;

pub use metrics::{measure_overheads, MetricsReport, Overheads};
pub use runner::{run_scenario, run_with_trace, START};
pub use scenario::{Fault, Scenario, ScenarioInvalid};
pub use trace::{generate_trace, Profile, RevocationTrace, TraceParams};
