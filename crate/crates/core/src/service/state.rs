use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::alert::{
    cluster_rollup, evaluate_node, load_thresholds, HwEvent, JobActivity, NodeStatus, NodeTelemetry, ThresholdError,
    Thresholds,
};
use crate::sim::{build_topology, ClusterTopology};
use crate::tsq::{eval_query, parse_query, QueryError, ResultSet, Store, NANOS_PER_SECOND};
use crate::wire::{parse_batch, parse_job_events, FieldValue, JobEvent, JobEventKind, MetricSample};

use super::config::ServiceConfig;
use super::snapshot::{diff_snapshots, ActiveJob, ClusterSnapshot, SensorReading, StreamEvent};
use super::ServiceError;

const OPEN_RATE_WINDOW_NS: i64 = 600 * NANOS_PER_SECOND;
const PRUNE_EVERY_NS: i64 = 60 * NANOS_PER_SECOND;
/// Errors echoed back per request.
const MAX_REPORTED_ERRORS: usize = 20;

fn read<T>(l: &RwLock<T>) -> RwLockReadGuard<'_, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn write<T>(l: &RwLock<T>) -> RwLockWriteGuard<'_, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub offset: usize,
    pub message: String,
}

/// Result of one ingest or job-event request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub first_errors: Vec<LineError>,
}

impl IngestReport {
    /// Everything in a non-empty body failed.
    pub fn all_rejected(&self) -> bool {
        self.accepted == 0 && self.rejected > 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct NodeLatest {
    last_seen: Option<i64>,
    values: BTreeMap<String, (i64, FieldValue)>,
    hw: BTreeMap<String, HwEvent>,
}

impl NodeLatest {
    fn seen(&mut self, ts: i64) {
        self.last_seen = Some(self.last_seen.map_or(ts, |t| t.max(ts)));
    }

    fn value(&mut self, name: &str, ts: i64, v: FieldValue) {
        match self.values.get_mut(name) {
            Some(slot) if slot.0 > ts => {}
            Some(slot) => *slot = (ts, v),
            None => {
                self.values.insert(name.to_owned(), (ts, v));
            }
        }
    }

    fn hw_event(&mut self, component: &str, ev: HwEvent) {
        match self.hw.get(component) {
            Some(old) if old.timestamp > ev.timestamp => {}
            _ => {
                self.hw.insert(component.to_owned(), ev);
            }
        }
    }
}

/// Numeric values are kept as floats so that the incremental view equals a
/// view rebuilt from the store.
fn normalize(v: &FieldValue) -> FieldValue {
    match v.as_f64() {
        Some(x) => FieldValue::Float(x),
        None => v.clone(),
    }
}

fn hw_from_fields(fields: &BTreeMap<String, FieldValue>, ts: i64) -> HwEvent {
    HwEvent {
        severity: fields.get("severity").and_then(FieldValue::as_f64).unwrap_or(0.0) as i64,
        acked: fields.get("acked").and_then(FieldValue::as_bool).unwrap_or(false),
        timestamp: ts,
    }
}

#[derive(Default)]
struct Latest {
    nodes: HashMap<String, NodeLatest>,
    sensors: BTreeMap<String, SensorReading>,
    jobs: BTreeMap<String, JobEvent>,
}

impl Latest {
    fn apply(&mut self, s: &MetricSample) {
        if let Some(host) = s.tags.get("host") {
            let Some(node) = self.nodes.get_mut(host) else { return };
            node.seen(s.timestamp);
            match s.measurement.as_str() {
                "hwevent" => {
                    let comp = s.tags.get("component").map_or("unknown", String::as_str);
                    node.hw_event(comp, hw_from_fields(&s.fields, s.timestamp));
                }
                "lustre" => {}
                _ => {
                    for (k, v) in &s.fields {
                        node.value(k, s.timestamp, normalize(v));
                    }
                }
            }
        } else if let Some(sensor) = s.tags.get("sensor") {
            let r = self.sensors.entry(sensor.clone()).or_insert_with(|| SensorReading {
                sensor: sensor.clone(),
                rack: None,
                timestamp: i64::MIN,
                values: BTreeMap::new(),
            });
            if s.timestamp < r.timestamp {
                return;
            }
            r.timestamp = s.timestamp;
            r.rack = s.tags.get("rack").cloned().or(r.rack.take());
            for (k, v) in &s.fields {
                if let Some(x) = v.as_f64() {
                    r.values.insert(k.clone(), x);
                }
            }
        }
    }
}

/// Open rate per job over the last 10 minutes of its metadata-server
/// counter: latest value minus the value at or before `latest - 10m` (the
/// oldest retained value when the window is not yet full). Hosts of one job
/// report the same counter; the largest rate wins.
pub fn job_open_rates(store: &Store, now: i64) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (tags, series) in store.series("lustre") {
        let Some(job) = tags.get("jobid") else { continue };
        let Some(points) = series.field("jobstats_open") else {
            continue;
        };
        let Some((&t, &v)) = points.range(..=now).next_back() else {
            continue;
        };
        let base = points
            .range(..=t - OPEN_RATE_WINDOW_NS)
            .next_back()
            .or_else(|| points.iter().next())
            .map(|(_, b)| *b)
            .unwrap_or(v);
        // A counter that went backwards was reset.
        let rate = if v >= base { v - base } else { v };
        let e = out.entry(job.clone()).or_insert(rate);
        *e = e.max(rate);
    }
    out
}

pub type EventSender = broadcast::Sender<Arc<StreamEvent>>;
pub type EventReceiver = broadcast::Receiver<Arc<StreamEvent>>;

/// The running state: store, latest values, thresholds and the published
/// snapshot. All methods take `&self`; share it behind an `Arc`.
pub struct Service {
    config: ServiceConfig,
    topology: ClusterTopology,
    digest: String,
    store: RwLock<Store>,
    latest: Mutex<Latest>,
    thresholds: RwLock<Arc<Thresholds>>,
    snapshot: RwLock<Arc<ClusterSnapshot>>,
    events: EventSender,
    tick_lock: Mutex<i64>,
    accepted_total: AtomicU64,
    rejected_total: AtomicU64,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let thresholds = config.thresholds()?;
        Self::with_thresholds(config, thresholds)
    }

    pub fn with_thresholds(config: ServiceConfig, thresholds: Thresholds) -> Result<Self, ServiceError> {
        thresholds.validate()?;
        let topology = build_topology(&config.topology)?;
        let digest = topology.digest();
        let latest = Latest {
            nodes: topology
                .nodes()
                .map(|n| (n.id.clone(), NodeLatest::default()))
                .collect(),
            ..Default::default()
        };
        let (events, _) = broadcast::channel(config.stream_queue.max(1));
        let svc = Service {
            topology,
            digest,
            store: RwLock::new(Store::new()),
            latest: Mutex::new(latest),
            thresholds: RwLock::new(Arc::new(thresholds)),
            snapshot: RwLock::new(Arc::new(ClusterSnapshot {
                seq: 0,
                generated_at: 0,
                nodes: vec![],
                rollup: Default::default(),
                jobs: vec![],
                sensors: vec![],
                topology_digest: String::new(),
            })),
            events,
            tick_lock: Mutex::new(i64::MIN),
            accepted_total: AtomicU64::new(0),
            rejected_total: AtomicU64::new(0),
            config,
        };
        // Cold start: every node is evaluated as never seen.
        let initial = svc.build_snapshot(0, 0);
        *write(&svc.snapshot) = Arc::new(initial);
        Ok(svc)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    pub fn snapshot(&self) -> Arc<ClusterSnapshot> {
        read(&self.snapshot).clone()
    }

    pub fn thresholds(&self) -> Arc<Thresholds> {
        read(&self.thresholds).clone()
    }

    pub fn totals(&self) -> (u64, u64) {
        (
            self.accepted_total.load(Ordering::Relaxed),
            self.rejected_total.load(Ordering::Relaxed),
        )
    }

    /// Current snapshot plus a receiver for every event after it. Taken
    /// under the snapshot lock, so no event is missed or duplicated.
    pub fn subscribe(&self) -> (Arc<ClusterSnapshot>, EventReceiver) {
        let guard = read(&self.snapshot);
        (guard.clone(), self.events.subscribe())
    }

    /// Parses line protocol and stores every valid sample.
    pub fn apply_ingest(&self, body: &str, receipt_ns: i64) -> IngestReport {
        let parsed = parse_batch(body, receipt_ns);
        {
            let mut store = write(&self.store);
            store.insert_all(&parsed.samples);
        }
        {
            let mut latest = lock(&self.latest);
            for s in &parsed.samples {
                latest.apply(s);
            }
        }
        self.accepted_total
            .fetch_add(parsed.samples.len() as u64, Ordering::Relaxed);
        self.rejected_total
            .fetch_add(parsed.errors.len() as u64, Ordering::Relaxed);
        IngestReport {
            accepted: parsed.samples.len(),
            rejected: parsed.errors.len(),
            first_errors: parsed
                .errors
                .iter()
                .take(MAX_REPORTED_ERRORS)
                .map(|(line, e)| LineError {
                    line: *line,
                    offset: e.offset,
                    message: e.kind.to_string(),
                })
                .collect(),
        }
    }

    /// Applies scheduler job events (JSON lines).
    pub fn apply_jobs(&self, body: &str) -> IngestReport {
        let (events, errors) = parse_job_events(body);
        {
            let mut latest = lock(&self.latest);
            for ev in &events {
                match ev.event {
                    JobEventKind::Start => {
                        latest.jobs.insert(ev.job_id.clone(), ev.clone());
                    }
                    JobEventKind::End => {
                        latest.jobs.remove(&ev.job_id);
                    }
                }
            }
        }
        IngestReport {
            accepted: events.len(),
            rejected: errors.len(),
            first_errors: errors
                .iter()
                .take(MAX_REPORTED_ERRORS)
                .map(|(line, e)| LineError {
                    line: *line,
                    offset: 0,
                    message: e.to_string(),
                })
                .collect(),
        }
    }

    pub fn apply_job_events(&self, events: &[JobEvent]) {
        let text: String = events.iter().map(|e| e.to_json_line() + "\n").collect();
        self.apply_jobs(&text);
    }

    pub fn query(&self, text: &str, now: i64) -> Result<ResultSet, QueryError> {
        let q = parse_query(text)?;
        let store = read(&self.store);
        Ok(eval_query(&store, &q, now))
    }

    /// Runs `f` with shared access to the store.
    pub fn with_store<R>(&self, f: impl FnOnce(&Store) -> R) -> R {
        f(&read(&self.store))
    }

    /// Replaces the thresholds after validating them. The old set stays in
    /// force on error.
    pub fn set_thresholds(&self, th: Thresholds) -> Result<(), ThresholdError> {
        th.validate()?;
        *write(&self.thresholds) = Arc::new(th);
        Ok(())
    }

    pub fn reload_thresholds(&self, text: &str) -> Result<(), ThresholdError> {
        self.set_thresholds(load_thresholds(text)?)
    }

    fn telemetry(&self, id: &str, node: &NodeLatest) -> NodeTelemetry {
        let desc = self.topology.node(id);
        NodeTelemetry {
            node_id: id.to_owned(),
            profile: desc.map(|d| d.profile.name.clone()).unwrap_or_default(),
            cores: desc.map_or(0, |d| d.profile.cores),
            gpus: desc.map_or(0, |d| d.profile.gpus),
            last_seen: node.last_seen,
            values: node.values.iter().map(|(k, (_, v))| (k.clone(), v.clone())).collect(),
            hw_events: node.hw.clone(),
        }
    }

    fn evaluate_all(
        &self,
        nodes: &HashMap<String, NodeLatest>,
        jobs: &[ActiveJob],
        th: &Thresholds,
        now: i64,
    ) -> Vec<NodeStatus> {
        let mut per_node: HashMap<&str, Vec<JobActivity>> = HashMap::new();
        for j in jobs {
            for n in &j.event.nodes {
                per_node.entry(n.as_str()).or_default().push(JobActivity {
                    job_id: j.event.job_id.clone(),
                    user: j.event.user.clone(),
                    open_rate_10m: j.open_rate_10m,
                });
            }
        }
        let empty = NodeLatest::default();
        self.topology
            .nodes()
            .map(|d| {
                let t = self.telemetry(&d.id, nodes.get(&d.id).unwrap_or(&empty));
                let acts = per_node.get(d.id.as_str()).map_or(&[][..], Vec::as_slice);
                evaluate_node(&t, acts, th, now)
            })
            .collect()
    }

    fn active_jobs(&self, jobs: &BTreeMap<String, JobEvent>, now: i64) -> Vec<ActiveJob> {
        let rates = self.with_store(|s| job_open_rates(s, now));
        jobs.values()
            .map(|e| ActiveJob {
                event: e.clone(),
                open_rate_10m: rates.get(&e.job_id).copied(),
            })
            .collect()
    }

    fn build_snapshot(&self, seq: u64, now: i64) -> ClusterSnapshot {
        let th = self.thresholds();
        let (nodes, jobs, sensors) = {
            let l = lock(&self.latest);
            (
                l.nodes.clone(),
                l.jobs.clone(),
                l.sensors.values().cloned().collect::<Vec<_>>(),
            )
        };
        let jobs = self.active_jobs(&jobs, now);
        let statuses = self.evaluate_all(&nodes, &jobs, &th, now);
        let mut statuses = statuses;
        statuses.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        ClusterSnapshot {
            seq,
            generated_at: now,
            rollup: cluster_rollup(&statuses),
            nodes: statuses,
            jobs,
            sensors,
            topology_digest: self.digest.clone(),
        }
    }

    /// One evaluation pass: evaluates every node, publishes snapshot seq+1
    /// and returns the events that lead to it from the previous snapshot.
    pub fn evaluation_tick(&self, now: i64) -> (Arc<ClusterSnapshot>, Vec<StreamEvent>) {
        let mut last_prune = lock(&self.tick_lock);
        let prev = self.snapshot();
        let next = Arc::new(self.build_snapshot(prev.seq + 1, now));
        let events = diff_snapshots(&prev, &next);
        {
            let mut published = write(&self.snapshot);
            for e in &events {
                // No subscribers is not an error.
                let _ = self.events.send(Arc::new(e.clone()));
            }
            *published = next.clone();
        }
        if now.saturating_sub(*last_prune) >= PRUNE_EVERY_NS {
            *last_prune = now;
            let retention = self.config.retention_s as i64 * NANOS_PER_SECOND;
            let mut store = write(&self.store);
            // Retention counts back from the newest data, so replayed
            // history is not wiped by a wall-clock evaluation.
            let anchor = store.newest_timestamp().map_or(now, |t| t.min(now));
            let cutoff = anchor.saturating_sub(retention);
            store.prune_before(cutoff);
            drop(store);
            let mut l = lock(&self.latest);
            for n in l.nodes.values_mut() {
                n.values.retain(|_, (t, _)| *t >= cutoff);
            }
        }
        (next, events)
    }

    /// Node statuses rebuilt from the raw store alone, bypassing the
    /// incrementally maintained latest values.
    pub fn recompute_from_store(&self, now: i64) -> Vec<NodeStatus> {
        let th = self.thresholds();
        let jobs_map = lock(&self.latest).jobs.clone();
        let jobs = self.active_jobs(&jobs_map, now);
        let nodes = self.with_store(|s| latest_from_store(s, &self.topology));
        let mut st = self.evaluate_all(&nodes, &jobs, &th, now);
        st.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        st
    }
}

fn latest_from_store(store: &Store, topo: &ClusterTopology) -> HashMap<String, NodeLatest> {
    let mut nodes: HashMap<String, NodeLatest> = topo.nodes().map(|n| (n.id.clone(), NodeLatest::default())).collect();
    for m in store.measurements() {
        for (tags, series) in store.series(m) {
            let Some(node) = tags.get("host").and_then(|h| nodes.get_mut(h)) else {
                continue;
            };
            let Some(ts) = series.last_timestamp() else { continue };
            node.seen(ts);
            match m {
                "hwevent" => {
                    let comp = tags.get("component").map_or("unknown", String::as_str);
                    let mut fields = BTreeMap::new();
                    for name in ["severity", "acked"] {
                        if let Some((_, v)) = series.latest(name) {
                            fields.insert(name.to_owned(), v);
                        }
                    }
                    node.hw_event(comp, hw_from_fields(&fields, ts));
                }
                "lustre" => {}
                _ => {
                    let names: Vec<String> = series
                        .fields()
                        .map(|(k, _)| k.to_owned())
                        .chain(series.latest_non_numeric().map(|(k, _, _)| k.to_owned()))
                        .collect();
                    for name in names {
                        if let Some((t, v)) = series.latest(&name) {
                            node.value(&name, t, v);
                        }
                    }
                }
            }
        }
    }
    nodes
}
