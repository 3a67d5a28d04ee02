//! Synthetic cluster: topology, per-node seeded telemetry, a job mix with
//! metadata-server counters, and injectable failure scenarios.

mod generator;
mod presets;
mod scenario;
mod topology;

use thiserror::Error;

pub use generator::{
    EmissionStats, JobMix, JobSpec, ScenarioId, SimConfig, Simulator, TickOutput, DEFAULT_START_NS, DEFAULT_TICK_NS,
    HW_FAULT_COMPONENT, JOBSTATS_INTERVAL_NS,
};
pub use presets::{storm_investigation, storm_query_now, STORM_JOBS, STORM_QUERY, STORM_TICKS};
pub use scenario::{load_scenarios, Scenario, ScenarioKind};
pub use topology::{
    build_topology, builtin_profiles, find_profile, ClusterTopology, EnvSensor, NodeDescriptor, NodeProfile, Rack,
    TopologySpec, DEFAULT_PROFILE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown node profile {0:?}")]
    UnknownProfile(String),
    #[error("unknown scenario target {0:?}")]
    UnknownTarget(String),
    #[error("invalid configuration: {0}")]
    InvalidSpec(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}
