use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alert::{ClusterRollup, NodeStatus};
use crate::wire::JobEvent;

/// A job currently running, with its metadata-server open rate over the last
/// 10 minutes when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveJob {
    #[serde(flatten)]
    pub event: JobEvent,
    pub open_rate_10m: Option<f64>,
}

impl ActiveJob {
    pub fn job_id(&self) -> &str {
        &self.event.job_id
    }
}

/// Latest reading of one facility sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor: String,
    pub rack: Option<String>,
    pub timestamp: i64,
    pub values: BTreeMap<String, f64>,
}

/// Cluster state produced by one evaluation pass. Lists are sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub seq: u64,
    pub generated_at: i64,
    pub nodes: Vec<NodeStatus>,
    pub rollup: ClusterRollup,
    pub jobs: Vec<ActiveJob>,
    pub sensors: Vec<SensorReading>,
    pub topology_digest: String,
}

impl ClusterSnapshot {
    pub fn node(&self, id: &str) -> Option<&NodeStatus> {
        self.nodes
            .binary_search_by(|n| n.node_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn job(&self, id: &str) -> Option<&ActiveJob> {
        self.jobs
            .binary_search_by(|j| j.job_id().cmp(id))
            .ok()
            .map(|i| &self.jobs[i])
    }

    /// Canonical JSON form used for equality checks across transports.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("snapshots always serialize")
    }

    /// Applies one stream event. Events at or below the current seq and
    /// heartbeats leave the snapshot untouched; a full snapshot replaces it.
    pub fn apply(&mut self, ev: &StreamEvent) -> Result<(), ReplayError> {
        if let EventPayload::Snapshot(s) = &ev.payload {
            *self = (**s).clone();
            return Ok(());
        }
        if matches!(ev.payload, EventPayload::Heartbeat(_)) || ev.seq <= self.seq {
            return Ok(());
        }
        if ev.seq != self.seq + 1 {
            return Err(ReplayError::Gap {
                have: self.seq,
                got: ev.seq,
            });
        }
        match &ev.payload {
            EventPayload::NodeStatus(n) => upsert(&mut self.nodes, n.clone(), |x| x.node_id.clone()),
            EventPayload::Job(j) => upsert(&mut self.jobs, j.clone(), |x| x.event.job_id.clone()),
            EventPayload::JobEnd(e) => self.jobs.retain(|j| j.event.job_id != e.job_id),
            EventPayload::Rollup(r) => self.rollup = r.clone(),
            EventPayload::Sensor(s) => upsert(&mut self.sensors, s.clone(), |x| x.sensor.clone()),
            EventPayload::Tick(t) => {
                self.seq = ev.seq;
                self.generated_at = t.generated_at;
            }
            EventPayload::Snapshot(_) | EventPayload::Heartbeat(_) => unreachable!(),
        }
        Ok(())
    }
}

fn upsert<T>(list: &mut Vec<T>, item: T, key: impl Fn(&T) -> String) {
    let k = key(&item);
    match list.binary_search_by(|x| key(x).cmp(&k)) {
        Ok(i) => list[i] = item,
        Err(i) => list.insert(i, item),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("missed events: snapshot at seq {have}, next event has seq {got}")]
    Gap { have: u64, got: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEnd {
    pub job_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickInfo {
    pub generated_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatInfo {
    pub at: i64,
}

/// Payload of a stream event, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    Snapshot(Box<ClusterSnapshot>),
    NodeStatus(NodeStatus),
    Job(ActiveJob),
    JobEnd(JobEnd),
    Rollup(ClusterRollup),
    Sensor(SensorReading),
    /// Closes evaluation pass `seq`; after it the replayed state equals
    /// snapshot `seq`.
    Tick(TickInfo),
    Heartbeat(HeartbeatInfo),
}

/// One NDJSON line of `GET /stream`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl StreamEvent {
    pub fn kind(&self) -> &'static str {
        match self.payload {
            EventPayload::Snapshot(_) => "snapshot",
            EventPayload::NodeStatus(_) => "node_status",
            EventPayload::Job(_) => "job",
            EventPayload::JobEnd(_) => "job_end",
            EventPayload::Rollup(_) => "rollup",
            EventPayload::Sensor(_) => "sensor",
            EventPayload::Tick(_) => "tick",
            EventPayload::Heartbeat(_) => "heartbeat",
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("stream events always serialize");
        s.push('\n');
        s
    }
}

/// Events that turn `old` into `new`, ending with the closing tick.
pub fn diff_snapshots(old: &ClusterSnapshot, new: &ClusterSnapshot) -> Vec<StreamEvent> {
    let seq = new.seq;
    let ev = |payload| StreamEvent { seq, payload };
    let mut out = Vec::new();
    for n in &new.nodes {
        if old.node(&n.node_id) != Some(n) {
            out.push(ev(EventPayload::NodeStatus(n.clone())));
        }
    }
    for j in &old.jobs {
        if new.job(j.job_id()).is_none() {
            out.push(ev(EventPayload::JobEnd(JobEnd {
                job_id: j.event.job_id.clone(),
            })));
        }
    }
    for j in &new.jobs {
        if old.job(j.job_id()) != Some(j) {
            out.push(ev(EventPayload::Job(j.clone())));
        }
    }
    if old.rollup != new.rollup {
        out.push(ev(EventPayload::Rollup(new.rollup.clone())));
    }
    let old_sensors: BTreeMap<&str, &SensorReading> = old.sensors.iter().map(|s| (s.sensor.as_str(), s)).collect();
    for s in &new.sensors {
        if old_sensors.get(s.sensor.as_str()) != Some(&s) {
            out.push(ev(EventPayload::Sensor(s.clone())));
        }
    }
    out.push(ev(EventPayload::Tick(TickInfo {
        generated_at: new.generated_at,
    })));
    out
}
