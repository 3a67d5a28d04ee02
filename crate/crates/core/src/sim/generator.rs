use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alert::{default_mounts, DEFAULT_STACK_VERSION};
use crate::tsq::NANOS_PER_SECOND;
use crate::wire::line::push_escaped;
use crate::wire::{JobEvent, JobEventKind};

use super::scenario::{Scenario, ScenarioKind};
use super::topology::{build_topology, substream_seed, ClusterTopology, NodeDescriptor, TopologySpec};
use super::SimError;

/// 2021-06-10T15:00:00Z.
pub const DEFAULT_START_NS: i64 = 1_623_337_200 * NANOS_PER_SECOND;
pub const DEFAULT_TICK_NS: i64 = 30 * NANOS_PER_SECOND;
/// Metadata-server job counters advance once per this interval.
pub const JOBSTATS_INTERVAL_NS: i64 = 600 * NANOS_PER_SECOND;
/// Component that reports injected hardware faults.
pub const HW_FAULT_COMPONENT: &str = "dimm0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: String,
    pub user: String,
    pub nodes: Vec<String>,
    #[serde(default)]
    pub start_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_tick: Option<u64>,
    /// Baseline metadata opens per 10 minutes.
    pub opens_per_10m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum JobMix {
    /// Nodes are carved into 1 to `max_nodes` node jobs; each chunk is busy
    /// with probability `busy_fraction`. Finished jobs are replaced.
    Random {
        busy_fraction: f64,
        max_nodes: u32,
    },
    Explicit {
        jobs: Vec<JobSpec>,
    },
    None,
}

impl Default for JobMix {
    fn default() -> Self {
        JobMix::Random {
            busy_fraction: 0.6,
            max_nodes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub topology: TopologySpec,
    pub start_ns: i64,
    pub tick_ns: i64,
    pub jobs: JobMix,
    pub stack_version: String,
    pub mounts: Vec<String>,
    pub facility_sensors: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            topology: TopologySpec::default(),
            start_ns: DEFAULT_START_NS,
            tick_ns: DEFAULT_TICK_NS,
            jobs: JobMix::default(),
            stack_version: DEFAULT_STACK_VERSION.to_owned(),
            mounts: default_mounts(),
            facility_sensors: true,
        }
    }
}

/// Point counts for emitted telemetry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionStats {
    pub ticks: u64,
    pub lines: u64,
    pub field_points: u64,
    pub numeric_points: u64,
}

impl EmissionStats {
    fn add(&mut self, o: &EmissionStats) {
        self.ticks += o.ticks;
        self.lines += o.lines;
        self.field_points += o.field_points;
        self.numeric_points += o.numeric_points;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub tick: u64,
    pub timestamp: i64,
    pub telemetry: String,
    pub job_events: Vec<JobEvent>,
    pub stats: EmissionStats,
}

pub type ScenarioId = u64;

#[derive(Debug, Clone, Copy)]
struct Band {
    lo: f64,
    hi: f64,
    step: f64,
}

const LOAD_PER_CORE: Band = Band {
    lo: 0.05,
    hi: 0.9,
    step: 0.03,
};
const CLOCK_MHZ: Band = Band {
    lo: 2400.0,
    hi: 3100.0,
    step: 25.0,
};
const MEM_FREE: Band = Band {
    lo: 25.0,
    hi: 85.0,
    step: 1.0,
};
const GPU_UTIL: Band = Band {
    lo: 0.0,
    hi: 85.0,
    step: 4.0,
};
const DISK_FREE: Band = Band {
    lo: 40.0,
    hi: 90.0,
    step: 0.2,
};
const TEMP_C: Band = Band {
    lo: 35.0,
    hi: 62.0,
    step: 0.5,
};
const POWER_CPU: Band = Band {
    lo: 180.0,
    hi: 420.0,
    step: 10.0,
};
const POWER_GPU: Band = Band {
    lo: 400.0,
    hi: 950.0,
    step: 15.0,
};
const FAN_RPM: Band = Band {
    lo: 3000.0,
    hi: 9000.0,
    step: 100.0,
};
const INLET_C: Band = Band {
    lo: 18.0,
    hi: 27.0,
    step: 0.2,
};
const HUMIDITY: Band = Band {
    lo: 30.0,
    hi: 55.0,
    step: 0.5,
};

impl Band {
    fn init(self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(self.lo..=self.hi)
    }

    /// Reflecting random walk that never leaves the band.
    fn walk(self, rng: &mut ChaCha8Rng, v: &mut f64) {
        let mut x = *v + rng.random_range(-self.step..=self.step);
        if x < self.lo {
            x = 2.0 * self.lo - x;
        } else if x > self.hi {
            x = 2.0 * self.hi - x;
        }
        *v = x.clamp(self.lo, self.hi);
    }
}

struct NodeState {
    desc: NodeDescriptor,
    rng: ChaCha8Rng,
    load_per_core: f64,
    clock_mhz: f64,
    mem_free: f64,
    gpu_util: f64,
    disk_free: f64,
    temp_c: f64,
    power_w: f64,
    fan_rpm: f64,
    hw_fault_reported: bool,
}

impl NodeState {
    fn new(desc: NodeDescriptor, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "node", &desc.id));
        let power = if desc.profile.gpus > 0 { POWER_GPU } else { POWER_CPU };
        NodeState {
            load_per_core: LOAD_PER_CORE.init(&mut rng),
            clock_mhz: CLOCK_MHZ.init(&mut rng),
            mem_free: MEM_FREE.init(&mut rng),
            gpu_util: GPU_UTIL.init(&mut rng),
            disk_free: DISK_FREE.init(&mut rng),
            temp_c: TEMP_C.init(&mut rng),
            power_w: power.init(&mut rng),
            fan_rpm: FAN_RPM.init(&mut rng),
            desc,
            rng,
            hw_fault_reported: false,
        }
    }

    fn walk(&mut self) {
        let r = &mut self.rng;
        LOAD_PER_CORE.walk(r, &mut self.load_per_core);
        CLOCK_MHZ.walk(r, &mut self.clock_mhz);
        MEM_FREE.walk(r, &mut self.mem_free);
        if self.desc.profile.gpus > 0 {
            GPU_UTIL.walk(r, &mut self.gpu_util);
            POWER_GPU.walk(r, &mut self.power_w);
        } else {
            POWER_CPU.walk(r, &mut self.power_w);
        }
        DISK_FREE.walk(r, &mut self.disk_free);
        TEMP_C.walk(r, &mut self.temp_c);
        FAN_RPM.walk(r, &mut self.fan_rpm);
    }
}

struct SensorState {
    id: String,
    rack: String,
    rng: ChaCha8Rng,
    temp_c: f64,
    humidity: f64,
}

#[derive(Debug, Clone)]
struct JobState {
    spec: JobSpec,
    /// Opens committed in finished intervals.
    committed: u64,
    interval: Option<i64>,
    /// Highest rate seen during the current interval.
    interval_rate: u64,
    running: bool,
}

impl JobState {
    fn new(spec: JobSpec) -> Self {
        JobState {
            spec,
            committed: 0,
            interval: None,
            interval_rate: 0,
            running: false,
        }
    }

    fn is_live(&self, tick: u64) -> bool {
        tick >= self.spec.start_tick && self.spec.end_tick.is_none_or(|e| tick < e)
    }

    /// Cumulative opens as reported at `ts`. Within one interval the counter
    /// holds `committed + rate`, so the difference of consecutive interval
    /// means is exactly that interval's rate.
    fn advance(&mut self, ts: i64, rate: f64) -> u64 {
        let iv = ts.div_euclid(JOBSTATS_INTERVAL_NS);
        if self.interval != Some(iv) {
            if self.interval.is_some() {
                self.committed += self.interval_rate;
            }
            self.interval = Some(iv);
            self.interval_rate = 0;
        }
        let r = rate.max(0.0).round() as u64;
        self.interval_rate = self.interval_rate.max(r);
        self.committed + self.interval_rate
    }
}

#[derive(Default, Clone, Copy)]
struct Overrides {
    down: bool,
    hw_severity: Option<f64>,
    version_drift: bool,
    mem_free: Option<f64>,
    load_per_core: Option<f64>,
    gpu_util: Option<f64>,
    disk_free: Option<f64>,
    temp_c: Option<f64>,
    power_w: Option<f64>,
    mount_loss: bool,
}

struct RandomJobs {
    rng: ChaCha8Rng,
    next_id: u64,
}

impl RandomJobs {
    fn spec(&mut self, nodes: Vec<String>, start_tick: u64) -> JobSpec {
        let id = self.next_id;
        self.next_id += 1;
        let duration = self.rng.random_range(120..=2880u64);
        JobSpec {
            job_id: id.to_string(),
            user: format!("user{:02}", self.rng.random_range(1..=40u32)),
            nodes,
            start_tick,
            end_tick: Some(start_tick + duration),
            opens_per_10m: self.rng.random_range(200.0..=20_000.0f64).round(),
        }
    }
}

/// Deterministic synthetic cluster. Every node draws from its own seeded
/// substream, so output depends only on the seed, the config and the
/// injected scenarios.
pub struct Simulator {
    cfg: SimConfig,
    topology: ClusterTopology,
    nodes: Vec<NodeState>,
    node_index: HashMap<String, usize>,
    sensors: Vec<SensorState>,
    jobs: Vec<JobState>,
    random_jobs: Option<RandomJobs>,
    scenarios: BTreeMap<ScenarioId, Scenario>,
    next_scenario: ScenarioId,
    tick: u64,
    totals: EmissionStats,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        if cfg.tick_ns <= 0 {
            return Err(SimError::InvalidSpec("tick_ns must be > 0".into()));
        }
        let topology = build_topology(&cfg.topology)?;
        let seed = cfg.topology.seed;
        let nodes: Vec<NodeState> = topology.nodes().map(|d| NodeState::new(d.clone(), seed)).collect();
        let node_index = nodes.iter().enumerate().map(|(i, n)| (n.desc.id.clone(), i)).collect();
        let sensors = topology
            .sensors
            .iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "sensor", &s.id));
                SensorState {
                    id: s.id.clone(),
                    rack: s.rack.clone(),
                    temp_c: INLET_C.init(&mut rng),
                    humidity: HUMIDITY.init(&mut rng),
                    rng,
                }
            })
            .collect();
        let mut sim = Simulator {
            topology,
            nodes,
            node_index,
            sensors,
            jobs: Vec::new(),
            random_jobs: None,
            scenarios: BTreeMap::new(),
            next_scenario: 1,
            tick: 0,
            totals: EmissionStats::default(),
            cfg,
        };
        match sim.cfg.jobs.clone() {
            JobMix::None => {}
            JobMix::Explicit { jobs } => {
                for j in jobs {
                    if j.nodes.is_empty() {
                        return Err(SimError::InvalidSpec(format!("job {} has no nodes", j.job_id)));
                    }
                    for n in &j.nodes {
                        if !sim.node_index.contains_key(n) {
                            return Err(SimError::UnknownTarget(n.clone()));
                        }
                    }
                    sim.jobs.push(JobState::new(j));
                }
            }
            JobMix::Random {
                busy_fraction,
                max_nodes,
            } => {
                let mut rj = RandomJobs {
                    rng: ChaCha8Rng::seed_from_u64(substream_seed(seed, "jobs", "")),
                    next_id: 23_150_000,
                };
                let ids: Vec<String> = sim.nodes.iter().map(|n| n.desc.id.clone()).collect();
                let mut i = 0;
                while i < ids.len() {
                    let size = rj.rng.random_range(1..=max_nodes.max(1)) as usize;
                    let chunk: Vec<String> = ids[i..(i + size).min(ids.len())].to_vec();
                    i += size;
                    if rj.rng.random::<f64>() < busy_fraction {
                        let spec = rj.spec(chunk, 0);
                        sim.jobs.push(JobState::new(spec));
                    }
                }
                sim.random_jobs = Some(rj);
            }
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    /// Index of the next tick to be emitted.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time_of(&self, tick: u64) -> i64 {
        self.cfg.start_ns + tick as i64 * self.cfg.tick_ns
    }

    pub fn totals(&self) -> EmissionStats {
        self.totals
    }

    /// Jobs running at the current tick.
    pub fn active_jobs(&self) -> Vec<&JobSpec> {
        self.jobs.iter().filter(|j| j.running).map(|j| &j.spec).collect()
    }

    pub fn jobs(&self) -> impl Iterator<Item = &JobSpec> + '_ {
        self.jobs.iter().map(|j| &j.spec)
    }

    pub fn scenarios(&self) -> &BTreeMap<ScenarioId, Scenario> {
        &self.scenarios
    }

    pub fn inject(&mut self, scenario: Scenario) -> Result<ScenarioId, SimError> {
        scenario.check_shape()?;
        for t in &scenario.targets {
            if scenario.kind.targets_jobs() {
                if !self.jobs.iter().any(|j| &j.spec.job_id == t) {
                    return Err(SimError::UnknownTarget(t.clone()));
                }
            } else {
                let &i = self
                    .node_index
                    .get(t)
                    .ok_or_else(|| SimError::UnknownTarget(t.clone()))?;
                if scenario.kind == ScenarioKind::GpuHog && self.nodes[i].desc.profile.gpus == 0 {
                    return Err(SimError::InvalidScenario(format!("{t} has no GPUs")));
                }
            }
        }
        let id = self.next_scenario;
        self.next_scenario += 1;
        self.scenarios.insert(id, scenario);
        Ok(id)
    }

    /// Removes a scenario; its effects stop from the next tick.
    pub fn cancel(&mut self, id: ScenarioId) -> bool {
        self.scenarios.remove(&id).is_some()
    }

    /// Resets every job counter to zero, as a metadata-server restart does.
    pub fn restart_metadata_server(&mut self) {
        for j in &mut self.jobs {
            j.committed = 0;
            j.interval_rate = 0;
        }
    }

    fn overrides(&self, tick: u64) -> (HashMap<usize, Overrides>, HashMap<String, f64>) {
        let mut per_node: HashMap<usize, Overrides> = HashMap::new();
        let mut storms: HashMap<String, f64> = HashMap::new();
        for s in self.scenarios.values().filter(|s| s.is_active(tick)) {
            let m = s.magnitude();
            for t in &s.targets {
                if s.kind.targets_jobs() {
                    let e = storms.entry(t.clone()).or_insert(m);
                    *e = e.max(m);
                    continue;
                }
                let Some(&i) = self.node_index.get(t) else { continue };
                let o = per_node.entry(i).or_default();
                match s.kind {
                    ScenarioKind::NodeDown => o.down = true,
                    ScenarioKind::HwFault => o.hw_severity = Some(m),
                    ScenarioKind::VersionDrift => o.version_drift = true,
                    ScenarioKind::Oom => o.mem_free = Some(m),
                    ScenarioKind::CpuHog => o.load_per_core = Some(m),
                    ScenarioKind::GpuHog => o.gpu_util = Some(m),
                    ScenarioKind::DiskFill => o.disk_free = Some(m),
                    ScenarioKind::Overheat => o.temp_c = Some(m),
                    ScenarioKind::PowerSpike => o.power_w = Some(m),
                    ScenarioKind::MountLoss => o.mount_loss = true,
                    ScenarioKind::MetadataStorm => unreachable!(),
                }
            }
        }
        (per_node, storms)
    }

    /// Emits the next tick stamped at its simulated time.
    pub fn step(&mut self) -> TickOutput {
        let ts = self.time_of(self.tick);
        self.step_at(ts)
    }

    /// Emits the next tick stamped at `ts` (wall-clock mode).
    pub fn step_at(&mut self, ts: i64) -> TickOutput {
        let mut telemetry = String::new();
        let tick = self.tick;
        let (stats, job_events) = self.step_into(ts, &mut telemetry);
        TickOutput {
            tick,
            timestamp: ts,
            telemetry,
            job_events,
            stats,
        }
    }

    /// Appends the next tick's telemetry to `out` and returns its counts and
    /// job events.
    pub fn step_into(&mut self, ts: i64, out: &mut String) -> (EmissionStats, Vec<JobEvent>) {
        let tick = self.tick;
        let mut st = EmissionStats {
            ticks: 1,
            ..Default::default()
        };
        let mut events = Vec::new();

        self.update_jobs(tick, ts, &mut events);
        let (overrides, storms) = self.overrides(tick);

        let mut ts_buf = String::with_capacity(24);
        let _ = write!(ts_buf, "{ts}");
        let drifted = format!("{}-drift", self.cfg.stack_version);
        let mut mounts_all = String::new();
        for (i, m) in self.cfg.mounts.iter().enumerate() {
            if i > 0 {
                mounts_all.push(',');
            }
            mounts_all.push_str(m);
        }
        let mounts_lost = self.cfg.mounts[..self.cfg.mounts.len().saturating_sub(1)].join(",");

        for (idx, node) in self.nodes.iter_mut().enumerate() {
            node.walk();
            let o = overrides.get(&idx).copied().unwrap_or_default();
            if o.down {
                continue;
            }
            let host = node.desc.id.as_str();
            let cores = f64::from(node.desc.profile.cores);
            let tags: [(&str, &str); 1] = [("host", host)];

            let load = o.load_per_core.unwrap_or(node.load_per_core) * cores;
            Line::start(out, "cpu", &tags)
                .float("load1", load)
                .int("clock_mhz", node.clock_mhz.round() as i64)
                .end(&ts_buf, &mut st);
            Line::start(out, "mem", &tags)
                .float("mem_free_pct", o.mem_free.unwrap_or(node.mem_free))
                .end(&ts_buf, &mut st);
            if node.desc.profile.gpus > 0 {
                Line::start(out, "gpu", &tags)
                    .float("gpu_util", o.gpu_util.unwrap_or(node.gpu_util))
                    .end(&ts_buf, &mut st);
            }
            Line::start(out, "disk", &tags)
                .float("disk_free_pct", o.disk_free.unwrap_or(node.disk_free))
                .end(&ts_buf, &mut st);
            Line::start(out, "env", &tags)
                .float("temp_c", o.temp_c.unwrap_or(node.temp_c))
                .float("power_w", o.power_w.unwrap_or(node.power_w))
                .int("fan_rpm", node.fan_rpm.round() as i64)
                .end(&ts_buf, &mut st);
            let version = if o.version_drift {
                &drifted
            } else {
                &self.cfg.stack_version
            };
            let mounts = if o.mount_loss { &mounts_lost } else { &mounts_all };
            Line::start(out, "sys", &tags)
                .text("stack_version", version)
                .text("mounts", mounts)
                .int("heartbeat", 1)
                .end(&ts_buf, &mut st);

            match o.hw_severity {
                Some(sev) => {
                    Line::start(out, "hwevent", &[("component", HW_FAULT_COMPONENT), ("host", host)])
                        .int("severity", sev.round() as i64)
                        .boolean("acked", false)
                        .end(&ts_buf, &mut st);
                    node.hw_fault_reported = true;
                }
                None if node.hw_fault_reported => {
                    Line::start(out, "hwevent", &[("component", HW_FAULT_COMPONENT), ("host", host)])
                        .int("severity", 0)
                        .boolean("acked", true)
                        .end(&ts_buf, &mut st);
                    node.hw_fault_reported = false;
                }
                None => {}
            }
        }

        for job in self.jobs.iter_mut().filter(|j| j.running) {
            let rate = storms.get(&job.spec.job_id).copied().unwrap_or(job.spec.opens_per_10m);
            let counter = job.advance(ts, rate);
            for host in &job.spec.nodes {
                let &i = self.node_index.get(host).expect("job nodes are validated");
                if overrides.get(&i).is_some_and(|o| o.down) {
                    continue;
                }
                Line::start(out, "lustre", &[("host", host), ("jobid", &job.spec.job_id)])
                    .int("jobstats_open", counter as i64)
                    .end(&ts_buf, &mut st);
            }
        }

        if self.cfg.facility_sensors {
            for s in &mut self.sensors {
                INLET_C.walk(&mut s.rng, &mut s.temp_c);
                HUMIDITY.walk(&mut s.rng, &mut s.humidity);
                Line::start(out, "facility", &[("rack", &s.rack), ("sensor", &s.id)])
                    .float("temp_c", s.temp_c)
                    .float("humidity_pct", s.humidity)
                    .end(&ts_buf, &mut st);
            }
        }

        self.tick += 1;
        self.totals.add(&st);
        (st, events)
    }

    fn update_jobs(&mut self, tick: u64, ts: i64, events: &mut Vec<JobEvent>) {
        let mut replacements = Vec::new();
        for job in &mut self.jobs {
            let live = job.is_live(tick);
            if live && !job.running {
                job.running = true;
                events.push(JobEvent {
                    job_id: job.spec.job_id.clone(),
                    user: job.spec.user.clone(),
                    nodes: job.spec.nodes.clone(),
                    event: JobEventKind::Start,
                    timestamp: ts,
                });
            } else if !live && job.running {
                job.running = false;
                events.push(JobEvent {
                    job_id: job.spec.job_id.clone(),
                    user: job.spec.user.clone(),
                    nodes: job.spec.nodes.clone(),
                    event: JobEventKind::End,
                    timestamp: ts,
                });
                if let Some(rj) = &mut self.random_jobs {
                    let gap = rj.rng.random_range(1..=20u64);
                    replacements.push(rj.spec(job.spec.nodes.clone(), tick + gap));
                }
            }
        }
        // Ended jobs are dropped once replaced, keeping the list bounded.
        if !replacements.is_empty() {
            self.jobs.retain(|j| j.running || j.spec.start_tick > tick);
            self.jobs.extend(replacements.into_iter().map(JobState::new));
        }
    }
}

/// Allocation-free line writer for the hot emission path.
struct Line<'a> {
    out: &'a mut String,
    first: bool,
    fields: u64,
    numeric: u64,
}

impl<'a> Line<'a> {
    fn start(out: &'a mut String, measurement: &str, tags: &[(&str, &str)]) -> Self {
        push_escaped(out, measurement);
        for (k, v) in tags {
            out.push(',');
            push_escaped(out, k);
            out.push('=');
            push_escaped(out, v);
        }
        out.push(' ');
        Line {
            out,
            first: true,
            fields: 0,
            numeric: 0,
        }
    }

    fn key(&mut self, k: &str) {
        if !self.first {
            self.out.push(',');
        }
        self.first = false;
        self.out.push_str(k);
        self.out.push('=');
        self.fields += 1;
    }

    fn float(mut self, k: &str, v: f64) -> Self {
        self.key(k);
        let r = (v * 100.0).round() / 100.0;
        let _ = write!(self.out, "{r}");
        self.numeric += 1;
        self
    }

    fn int(mut self, k: &str, v: i64) -> Self {
        self.key(k);
        let _ = write!(self.out, "{v}i");
        self.numeric += 1;
        self
    }

    fn boolean(mut self, k: &str, v: bool) -> Self {
        self.key(k);
        self.out.push_str(if v { "true" } else { "false" });
        self
    }

    fn text(mut self, k: &str, v: &str) -> Self {
        self.key(k);
        self.out.push('"');
        for ch in v.chars() {
            if ch == '"' || ch == '\\' {
                self.out.push('\\');
            }
            self.out.push(ch);
        }
        self.out.push('"');
        self
    }

    fn end(self, ts: &str, st: &mut EmissionStats) {
        self.out.push(' ');
        self.out.push_str(ts);
        self.out.push('\n');
        st.lines += 1;
        st.field_points += self.fields;
        st.numeric_points += self.numeric;
    }
}
