use crate::tsq::NANOS_PER_SECOND;

use super::generator::{JobMix, JobSpec, SimConfig, DEFAULT_START_NS};
use super::scenario::{Scenario, ScenarioKind};
use super::topology::TopologySpec;

/// The metadata-server investigation: six heavy jobs hammering the
/// metadata server, each with a fixed open rate per 10 minutes.
pub const STORM_JOBS: [(&str, f64); 6] = [
    ("23159087", 893_817.0),
    ("23159084", 496_977.0),
    ("23184225", 202_221.0),
    ("23184272", 201_494.0),
    ("23184274", 200_337.0),
    ("23184271", 199_973.0),
];

/// Query that finds the jobs with the highest open rates.
pub const STORM_QUERY: &str = r#"SELECT "jobid", ROUND(TOP("opens", 10)) AS "opens_last_10m" FROM (SELECT NON_NEGATIVE_DERIVATIVE(MEAN("jobstats_open"), 10m) AS "opens" FROM "lustre" WHERE time >= now() - 10m AND time <= now()) GROUP BY jobid, time(10m))"#;

/// Ticks to run so that the last tick lands on [`storm_query_now`].
pub const STORM_TICKS: u64 = 91;

/// 2021-06-10T15:45:00Z.
pub fn storm_query_now() -> i64 {
    DEFAULT_START_NS + 45 * 60 * NANOS_PER_SECOND
}

/// Simulator config and scenarios for the investigation. The storms run for
/// the whole simulated window.
pub fn storm_investigation(seed: u64) -> (SimConfig, Vec<Scenario>) {
    let jobs = STORM_JOBS
        .iter()
        .enumerate()
        .map(|(i, (id, _))| JobSpec {
            job_id: (*id).to_owned(),
            user: format!("user{:02}", i + 1),
            nodes: vec![format!("n{:03}", 2 * i + 1), format!("n{:03}", 2 * i + 2)],
            start_tick: 0,
            end_tick: None,
            opens_per_10m: 1_000.0,
        })
        .collect();
    let cfg = SimConfig {
        topology: TopologySpec::uniform(1, 16, "xeon-p8260", seed),
        jobs: JobMix::Explicit { jobs },
        ..Default::default()
    };
    let scenarios = STORM_JOBS
        .iter()
        .map(|(id, rate)| Scenario::new(ScenarioKind::MetadataStorm, [*id]).with_magnitude(*rate))
        .collect();
    (cfg, scenarios)
}
