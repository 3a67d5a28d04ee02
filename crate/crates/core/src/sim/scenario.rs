use serde::{Deserialize, Serialize};

use crate::alert::AlertKind;

use super::SimError;

/// Failure modes the simulator can inject. Each one drives exactly one
/// alert kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    NodeDown,
    HwFault,
    VersionDrift,
    Oom,
    CpuHog,
    GpuHog,
    DiskFill,
    MetadataStorm,
    Overheat,
    PowerSpike,
    MountLoss,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 11] = [
        ScenarioKind::NodeDown,
        ScenarioKind::HwFault,
        ScenarioKind::VersionDrift,
        ScenarioKind::Oom,
        ScenarioKind::CpuHog,
        ScenarioKind::GpuHog,
        ScenarioKind::DiskFill,
        ScenarioKind::MetadataStorm,
        ScenarioKind::Overheat,
        ScenarioKind::PowerSpike,
        ScenarioKind::MountLoss,
    ];

    /// The alert this scenario is expected to raise.
    pub fn alert(self) -> AlertKind {
        match self {
            ScenarioKind::NodeDown => AlertKind::Offline,
            ScenarioKind::HwFault => AlertKind::HardwareProblem,
            ScenarioKind::VersionDrift => AlertKind::VersionOutOfSync,
            ScenarioKind::Oom => AlertKind::LowMemory,
            ScenarioKind::CpuHog => AlertKind::CpuLoad,
            ScenarioKind::GpuHog => AlertKind::GpuLoad,
            ScenarioKind::DiskFill => AlertKind::StorageLow,
            ScenarioKind::MetadataStorm => AlertKind::JobOccupancy,
            ScenarioKind::Overheat => AlertKind::Temperature,
            ScenarioKind::PowerSpike => AlertKind::PowerUsage,
            ScenarioKind::MountLoss => AlertKind::MountMissing,
        }
    }

    /// Magnitude used when a scenario does not give one. Units depend on the
    /// kind: degrees C, percent free, load per core, percent busy, watts,
    /// hardware severity, or opens per 10 minutes.
    pub fn default_magnitude(self) -> f64 {
        match self {
            ScenarioKind::NodeDown | ScenarioKind::VersionDrift | ScenarioKind::MountLoss => 1.0,
            ScenarioKind::HwFault => 2.0,
            ScenarioKind::Oom => 3.0,
            ScenarioKind::CpuHog => 3.0,
            ScenarioKind::GpuHog => 99.0,
            ScenarioKind::DiskFill => 2.0,
            ScenarioKind::MetadataStorm => 500_000.0,
            ScenarioKind::Overheat => 85.0,
            ScenarioKind::PowerSpike => 1500.0,
        }
    }

    /// Metadata storms target job ids; everything else targets node ids.
    pub fn targets_jobs(self) -> bool {
        self == ScenarioKind::MetadataStorm
    }
}

/// One injected failure. Active for ticks in `[start_tick, stop_tick)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub targets: Vec<String>,
    #[serde(default)]
    pub start_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<f64>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, targets: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Scenario {
            kind,
            targets: targets.into_iter().map(Into::into).collect(),
            start_tick: 0,
            stop_tick: None,
            magnitude: None,
        }
    }

    pub fn starting(mut self, tick: u64) -> Self {
        self.start_tick = tick;
        self
    }

    pub fn stopping(mut self, tick: u64) -> Self {
        self.stop_tick = Some(tick);
        self
    }

    pub fn with_magnitude(mut self, m: f64) -> Self {
        self.magnitude = Some(m);
        self
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude.unwrap_or_else(|| self.kind.default_magnitude())
    }

    pub fn is_active(&self, tick: u64) -> bool {
        tick >= self.start_tick && self.stop_tick.is_none_or(|s| tick < s)
    }

    pub(crate) fn check_shape(&self) -> Result<(), SimError> {
        if self.targets.is_empty() {
            return Err(SimError::InvalidScenario("no targets".into()));
        }
        if let Some(stop) = self.stop_tick {
            if stop <= self.start_tick {
                return Err(SimError::InvalidScenario(format!(
                    "stop_tick {stop} is not after start_tick {}",
                    self.start_tick
                )));
            }
        }
        if let Some(m) = self.magnitude {
            if !m.is_finite() {
                return Err(SimError::InvalidScenario("magnitude must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Parses a JSON array of scenarios, or a single scenario object.
pub fn load_scenarios(text: &str) -> Result<Vec<Scenario>, SimError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| SimError::Json(e.to_string()))?;
    let list = if v.is_array() {
        serde_json::from_value::<Vec<Scenario>>(v)
    } else {
        serde_json::from_value::<Scenario>(v).map(|s| vec![s])
    }
    .map_err(|e| SimError::Json(e.to_string()))?;
    for s in &list {
        s.check_shape()?;
    }
    Ok(list)
}
