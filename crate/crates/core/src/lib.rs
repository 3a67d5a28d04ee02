//! Cluster telemetry monitoring: line-protocol ingestion, an in-memory
//! time-series query engine, threshold alerting, a synthetic cluster
//! simulator and a streaming state service.

pub mod alert;
pub mod assoc;
pub mod bench;
pub mod client;
pub mod service;
pub mod sim;
pub mod tsq;
pub mod wire;
