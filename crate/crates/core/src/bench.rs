//! Ingest throughput and end-to-end alert latency measurements.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::alert::AlertKind;
use crate::client::{Client, ClientError};
use crate::service::{now_ns, spawn_server, Service, ServiceConfig, ServiceError};
use crate::sim::{JobMix, Scenario, ScenarioKind, SimConfig, SimError, Simulator, TopologySpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("timed out: {0}")]
    Timeout(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputOptions {
    pub samples: u64,
    pub runs: usize,
    pub racks: u32,
    pub nodes_per_rack: u32,
    pub seed: u64,
}

impl Default for ThroughputOptions {
    fn default() -> Self {
        ThroughputOptions {
            samples: 1_000_000,
            runs: 5,
            racks: 10,
            nodes_per_rack: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRun {
    pub samples: u64,
    pub secs: f64,
    pub samples_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub samples: u64,
    pub runs: Vec<ThroughputRun>,
    /// Median over runs.
    pub samples_per_sec: f64,
    pub min_samples_per_sec: f64,
    pub max_samples_per_sec: f64,
    /// Largest distance of a run from the median, in percent of the median.
    pub max_deviation_pct: f64,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn corpus_config(o: &ThroughputOptions) -> SimConfig {
    SimConfig {
        topology: TopologySpec::uniform(o.racks, o.nodes_per_rack, "xeon-p8260", o.seed),
        ..Default::default()
    }
}

/// Simulator output split per tick, holding at least `samples` lines.
pub fn ingest_corpus(o: &ThroughputOptions) -> Result<(Vec<String>, u64), SimError> {
    let mut sim = Simulator::new(corpus_config(o))?;
    let mut chunks = Vec::new();
    let mut lines = 0;
    while lines < o.samples {
        let t = sim.step();
        lines += t.stats.lines;
        chunks.push(t.telemetry);
    }
    Ok((chunks, lines))
}

/// Parses and inserts the corpus through the service ingest path, once per
/// run, after one discarded warm-up run.
pub fn bench_ingest(o: &ThroughputOptions) -> Result<ThroughputReport, BenchError> {
    let (chunks, samples) = ingest_corpus(o)?;
    let svc_config = ServiceConfig {
        topology: corpus_config(o).topology,
        ..Default::default()
    };
    let mut runs = Vec::with_capacity(o.runs);
    for i in 0..=o.runs.max(1) {
        let svc = Service::new(svc_config.clone())?;
        let start = Instant::now();
        let mut accepted = 0;
        for c in &chunks {
            accepted += svc.apply_ingest(c, 0).accepted as u64;
        }
        let secs = start.elapsed().as_secs_f64();
        assert_eq!(accepted, samples, "simulator output always parses");
        if i > 0 {
            runs.push(ThroughputRun {
                samples,
                secs,
                samples_per_sec: samples as f64 / secs,
            });
        }
    }
    let rates: Vec<f64> = runs.iter().map(|r| r.samples_per_sec).collect();
    let med = median(&rates);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(0.0, f64::max);
    Ok(ThroughputReport {
        samples,
        max_deviation_pct: rates.iter().map(|r| (r - med).abs() / med * 100.0).fold(0.0, f64::max),
        runs,
        samples_per_sec: med,
        min_samples_per_sec: min,
        max_samples_per_sec: max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyOptions {
    pub trials: usize,
    pub racks: u32,
    pub nodes_per_rack: u32,
    /// Agent push period.
    pub push_interval_ms: u64,
    pub cadence_ms: u64,
    pub poll_ms: u64,
    pub timeout_ms: u64,
    pub seed: u64,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        LatencyOptions {
            trials: 5,
            racks: 2,
            nodes_per_rack: 48,
            push_interval_ms: 1000,
            cadence_ms: 1000,
            poll_ms: 20,
            timeout_ms: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub trials: usize,
    pub latencies_ms: Vec<f64>,
    pub median_ms: f64,
    pub max_ms: f64,
}

async fn wait_until<F>(client: &Client, timeout: Duration, poll: Duration, what: &str, ok: F) -> Result<(), BenchError>
where
    F: Fn(&crate::service::ClusterSnapshot) -> bool,
{
    let deadline = Instant::now() + timeout;
    loop {
        if ok(&client.snapshot().await?) {
            return Ok(());
        }
        if Instant::now() > deadline {
            return Err(BenchError::Timeout(what.to_owned()));
        }
        tokio::time::sleep(poll).await;
    }
}

/// Serves on a loopback port, drives a live simulator against it, and
/// measures how long an injected overheat takes to show up in
/// `GET /snapshot`. The clock starts when the fault is injected; the agent
/// reports it on its next push, which happens immediately.
pub async fn bench_latency(o: &LatencyOptions) -> Result<LatencyReport, BenchError> {
    let topology = TopologySpec::uniform(o.racks, o.nodes_per_rack, "xeon-p8260", o.seed);
    let svc = Arc::new(Service::new(ServiceConfig {
        topology: topology.clone(),
        cadence_ms: o.cadence_ms,
        ..Default::default()
    })?);
    let server = spawn_server(svc, "127.0.0.1:0", None).await?;
    let client = Client::new(server.url());
    let sim = Arc::new(Mutex::new(Simulator::new(SimConfig {
        topology,
        jobs: JobMix::None,
        ..Default::default()
    })?));

    let pusher = {
        let (sim, client) = (sim.clone(), client.clone());
        let period = Duration::from_millis(o.push_interval_ms.max(1));
        tokio::spawn(async move {
            let mut iv = tokio::time::interval(period);
            loop {
                iv.tick().await;
                let tick = sim.lock().await.step_at(now_ns());
                if let Err(e) = client.push_tick(&tick).await {
                    tracing::warn!("push failed: {e}");
                }
            }
        })
    };

    let timeout = Duration::from_millis(o.timeout_ms);
    let poll = Duration::from_millis(o.poll_ms.max(1));
    let result = async {
        wait_until(&client, timeout, poll, "all nodes reporting", |s| {
            s.nodes.iter().all(|n| n.alerts.is_empty())
        })
        .await?;
        let node_ids: Vec<String> = server.service.topology().nodes().map(|n| n.id.clone()).collect();
        let mut latencies = Vec::with_capacity(o.trials);
        for i in 0..o.trials {
            let target = node_ids[i * 7 % node_ids.len()].clone();
            let started = Instant::now();
            let (id, tick) = {
                let mut s = sim.lock().await;
                let at = s.tick();
                let id = s.inject(Scenario::new(ScenarioKind::Overheat, [target.clone()]).starting(at))?;
                (id, s.step_at(now_ns()))
            };
            client.push_tick(&tick).await?;
            wait_until(&client, timeout, poll, "overheat alert", |s| {
                s.node(&target).is_some_and(|n| n.has_alert(AlertKind::Temperature))
            })
            .await?;
            latencies.push(started.elapsed().as_secs_f64() * 1000.0);
            sim.lock().await.cancel(id);
            wait_until(&client, timeout, poll, "alert cleared", |s| {
                s.node(&target).is_some_and(|n| !n.has_alert(AlertKind::Temperature))
            })
            .await?;
        }
        Ok::<_, BenchError>(latencies)
    }
    .await;

    pusher.abort();
    server.stop().await;
    let latencies = result?;
    Ok(LatencyReport {
        trials: latencies.len(),
        median_ms: median(&latencies),
        max_ms: latencies.iter().copied().fold(0.0, f64::max),
        latencies_ms: latencies,
    })
}
