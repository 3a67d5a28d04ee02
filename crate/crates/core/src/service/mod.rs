//! The running system: ingestion, periodic evaluation into versioned
//! snapshots, and the HTTP surface (ingest, jobs, snapshot, NDJSON stream,
//! query, reload, health).

mod config;
mod http;
mod snapshot;
mod state;

use thiserror::Error;

use crate::alert::ThresholdError;
use crate::sim::SimError;

pub use config::{ServiceConfig, DEFAULT_LISTEN};
pub use http::{now_ns, parse_time_arg, router, spawn_evaluation_loop, spawn_server, ServerHandle};
pub use snapshot::{
    diff_snapshots, ActiveJob, ClusterSnapshot, EventPayload, HeartbeatInfo, JobEnd, ReplayError, SensorReading,
    StreamEvent, TickInfo,
};
pub use state::{job_open_rates, EventReceiver, IngestReport, LineError, Service};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Thresholds(#[from] ThresholdError),
    #[error(transparent)]
    Topology(#[from] SimError),
    #[error("cannot bind {0}")]
    Bind(String),
}
