use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::thresholds::Thresholds;
use crate::tsq::NANOS_PER_SECOND;
use crate::wire::FieldValue;

/// Node health, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Ok,
    Warn,
    Crit,
    Offline,
}

/// One kind per node-state row of the problem taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    Offline,
    HardwareProblem,
    VersionOutOfSync,
    LowMemory,
    CpuLoad,
    GpuLoad,
    StorageLow,
    JobOccupancy,
    Temperature,
    PowerUsage,
    MountMissing,
}

impl AlertKind {
    pub const ALL: [AlertKind; 11] = [
        AlertKind::Offline,
        AlertKind::HardwareProblem,
        AlertKind::VersionOutOfSync,
        AlertKind::LowMemory,
        AlertKind::CpuLoad,
        AlertKind::GpuLoad,
        AlertKind::StorageLow,
        AlertKind::JobOccupancy,
        AlertKind::Temperature,
        AlertKind::PowerUsage,
        AlertKind::MountMissing,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectiveKind {
    WholeNodeColor,
    ComponentHighlight,
    FanSpeed,
    FillLevel,
    Beacon,
    Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectiveValue {
    Scalar(f64),
    Text(String),
}

/// A rendering instruction for the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualDirective {
    pub kind: DirectiveKind,
    pub target: String,
    pub value: DirectiveValue,
}

impl VisualDirective {
    /// Scalar directive; the value is clamped to `[0, 1]`.
    pub fn scalar(kind: DirectiveKind, target: impl Into<String>, value: f64) -> Self {
        let v = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
        VisualDirective {
            kind,
            target: target.into(),
            value: DirectiveValue::Scalar(v),
        }
    }

    pub fn text(kind: DirectiveKind, target: impl Into<String>, value: impl Into<String>) -> Self {
        VisualDirective {
            kind,
            target: target.into(),
            value: DirectiveValue::Text(value.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobRef {
    pub job_id: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStatus {
    pub node_id: String,
    pub state: Severity,
    pub alerts: Vec<Alert>,
    pub directives: Vec<VisualDirective>,
    pub component_loads: BTreeMap<String, f64>,
    pub last_seen: Option<i64>,
    pub jobs: Vec<JobRef>,
    /// Latest node temperature, attached whenever it is known.
    pub temp_c: Option<f64>,
    pub missing_fields: Vec<String>,
}

impl NodeStatus {
    pub fn has_alert(&self, kind: AlertKind) -> bool {
        self.alerts.iter().any(|a| a.kind == kind)
    }

    pub fn alert_kinds(&self) -> Vec<AlertKind> {
        self.alerts.iter().map(|a| a.kind).collect()
    }
}

/// Latest reported state of one hardware component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwEvent {
    pub severity: i64,
    pub acked: bool,
    pub timestamp: i64,
}

pub const HW_SEVERITY_WARN: i64 = 1;
pub const HW_SEVERITY_CRIT: i64 = 2;

/// Everything known about one node at evaluation time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeTelemetry {
    pub node_id: String,
    pub profile: String,
    pub cores: u32,
    pub gpus: u32,
    pub last_seen: Option<i64>,
    /// Latest value per field name across the node's measurements.
    pub values: BTreeMap<String, FieldValue>,
    pub hw_events: BTreeMap<String, HwEvent>,
}

/// An active job on the node and its recent metadata-server open rate.
#[derive(Debug, Clone, PartialEq)]
pub struct JobActivity {
    pub job_id: String,
    pub user: String,
    pub open_rate_10m: Option<f64>,
}

impl NodeTelemetry {
    fn num(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(FieldValue::as_f64)
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(FieldValue::as_str)
    }

    fn required_fields(&self) -> Vec<&'static str> {
        let mut f = vec![
            "load1",
            "mem_free_pct",
            "disk_free_pct",
            "temp_c",
            "power_w",
            "stack_version",
            "mounts",
        ];
        if self.gpus > 0 {
            f.push("gpu_util");
        }
        f
    }
}

/// Splits the `mounts` field (comma-separated mount points).
pub fn parse_mounts(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|m| !m.is_empty()).collect()
}

fn color_for(sev: Severity) -> &'static str {
    match sev {
        Severity::Ok => "green",
        Severity::Warn => "amber",
        Severity::Crit | Severity::Offline => "red",
    }
}

/// Applies the per-kind rules to one node. Pure: the same inputs always give
/// the same status.
pub fn evaluate_node(t: &NodeTelemetry, jobs: &[JobActivity], th: &Thresholds, now: i64) -> NodeStatus {
    let eff = th.for_profile(&t.profile);
    let mut alerts: Vec<Alert> = Vec::new();
    let mut directives: Vec<VisualDirective> = Vec::new();
    let mut loads = BTreeMap::new();

    let missing_fields: Vec<String> = t
        .required_fields()
        .into_iter()
        .filter(|f| !t.values.contains_key(*f))
        .map(str::to_owned)
        .collect();

    let timeout_ns = (eff.heartbeat_timeout_s * NANOS_PER_SECOND as f64) as i64;
    let offline = match t.last_seen {
        None => true,
        Some(seen) => now.saturating_sub(seen) > timeout_ns,
    };

    let mut job_refs: Vec<JobRef> = jobs
        .iter()
        .map(|j| JobRef {
            job_id: j.job_id.clone(),
            user: j.user.clone(),
        })
        .collect();
    job_refs.sort();

    if offline {
        let msg = match t.last_seen {
            None => "never seen".to_owned(),
            Some(seen) => format!(
                "no telemetry for {:.0} s (timeout {} s)",
                (now - seen) as f64 / NANOS_PER_SECOND as f64,
                eff.heartbeat_timeout_s
            ),
        };
        alerts.push(Alert {
            kind: AlertKind::Offline,
            severity: Severity::Offline,
            message: msg,
        });
        directives.push(VisualDirective::text(DirectiveKind::WholeNodeColor, "node", "red"));
    } else {
        for (component, ev) in &t.hw_events {
            if ev.acked || ev.severity < HW_SEVERITY_WARN {
                continue;
            }
            let sev = if ev.severity >= HW_SEVERITY_CRIT {
                Severity::Crit
            } else {
                Severity::Warn
            };
            alerts.push(Alert {
                kind: AlertKind::HardwareProblem,
                severity: sev,
                message: format!("hardware event severity {} on {component}", ev.severity),
            });
            directives.push(VisualDirective::text(
                DirectiveKind::ComponentHighlight,
                component.clone(),
                color_for(sev),
            ));
        }

        if let Some(v) = t.text("stack_version") {
            if v != th.reference_stack_version {
                alerts.push(Alert {
                    kind: AlertKind::VersionOutOfSync,
                    severity: Severity::Warn,
                    message: format!(
                        "stack version {v:?} differs from reference {:?}",
                        th.reference_stack_version
                    ),
                });
                directives.push(VisualDirective::text(DirectiveKind::Beacon, "version", "amber"));
            }
        }

        if let Some(free) = t.num("mem_free_pct") {
            loads.insert("memory".to_owned(), (1.0 - free / 100.0).clamp(0.0, 1.0));
            if free < eff.mem_free_warn_pct {
                alerts.push(Alert {
                    kind: AlertKind::LowMemory,
                    severity: Severity::Warn,
                    message: format!("memory free {free}% < {}%", eff.mem_free_warn_pct),
                });
                directives.push(VisualDirective::scalar(
                    DirectiveKind::FillLevel,
                    "memory",
                    free / 100.0,
                ));
            }
        }

        if let Some(load1) = t.num("load1") {
            let cores = f64::from(t.cores.max(1));
            let per_core = load1 / cores;
            loads.insert("cpu".to_owned(), per_core.clamp(0.0, 1.0));
            if per_core > eff.cpu_load_per_core_warn {
                alerts.push(Alert {
                    kind: AlertKind::CpuLoad,
                    severity: Severity::Warn,
                    message: format!(
                        "load {load1} on {} cores ({per_core:.2}/core > {})",
                        t.cores, eff.cpu_load_per_core_warn
                    ),
                });
                directives.push(VisualDirective::scalar(
                    DirectiveKind::FanSpeed,
                    "cpu",
                    (load1 / (2.0 * cores)).min(1.0),
                ));
            }
        }

        if t.gpus > 0 {
            if let Some(util) = t.num("gpu_util") {
                loads.insert("gpu".to_owned(), (util / 100.0).clamp(0.0, 1.0));
                if util > eff.gpu_util_warn_pct {
                    alerts.push(Alert {
                        kind: AlertKind::GpuLoad,
                        severity: Severity::Warn,
                        message: format!("gpu utilization {util}% > {}%", eff.gpu_util_warn_pct),
                    });
                    directives.push(VisualDirective::scalar(DirectiveKind::FanSpeed, "gpu", util / 100.0));
                }
            }
        }

        if let Some(free) = t.num("disk_free_pct") {
            loads.insert("disk".to_owned(), (1.0 - free / 100.0).clamp(0.0, 1.0));
            if free < eff.disk_free_warn_pct {
                alerts.push(Alert {
                    kind: AlertKind::StorageLow,
                    severity: Severity::Warn,
                    message: format!("local disk free {free}% < {}%", eff.disk_free_warn_pct),
                });
                directives.push(VisualDirective::scalar(DirectiveKind::FillLevel, "disk", free / 100.0));
            }
        }

        for j in jobs {
            let Some(rate) = j.open_rate_10m else { continue };
            if rate > eff.open_rate_warn_per_10m {
                alerts.push(Alert {
                    kind: AlertKind::JobOccupancy,
                    severity: Severity::Warn,
                    message: format!(
                        "job {} ({}) opened {rate:.0} files in 10 min (> {})",
                        j.job_id, j.user, eff.open_rate_warn_per_10m
                    ),
                });
            }
        }

        if let Some(temp) = t.num("temp_c") {
            let sev = if temp >= eff.temp_crit_c {
                Some(Severity::Crit)
            } else if temp >= eff.temp_warn_c {
                Some(Severity::Warn)
            } else {
                None
            };
            if let Some(sev) = sev {
                alerts.push(Alert {
                    kind: AlertKind::Temperature,
                    severity: sev,
                    message: format!(
                        "temperature {temp} C (warn {}, crit {})",
                        eff.temp_warn_c, eff.temp_crit_c
                    ),
                });
                directives.push(VisualDirective::text(
                    DirectiveKind::ComponentHighlight,
                    "temperature",
                    color_for(sev),
                ));
            }
        }

        if let Some(power) = t.num("power_w") {
            if power > eff.power_warn_w {
                alerts.push(Alert {
                    kind: AlertKind::PowerUsage,
                    severity: Severity::Warn,
                    message: format!("power draw {power} W > {} W", eff.power_warn_w),
                });
                directives.push(VisualDirective::scalar(
                    DirectiveKind::FanSpeed,
                    "chassis",
                    power / (2.0 * eff.power_warn_w),
                ));
            }
        }

        if let Some(mounts) = t.text("mounts") {
            let present = parse_mounts(mounts);
            for m in &th.expected_mounts {
                if !present.contains(&m.as_str()) {
                    alerts.push(Alert {
                        kind: AlertKind::MountMissing,
                        severity: Severity::Crit,
                        message: format!("expected mount {m} is missing"),
                    });
                    directives.push(VisualDirective::text(DirectiveKind::Beacon, m.clone(), "red"));
                }
            }
        }
    }

    for j in &job_refs {
        directives.push(VisualDirective::text(
            DirectiveKind::Texture,
            j.job_id.clone(),
            j.user.clone(),
        ));
    }

    alerts.sort_by(|a, b| a.kind.cmp(&b.kind).then(b.severity.cmp(&a.severity)));
    let state = alerts.iter().map(|a| a.severity).max().unwrap_or(Severity::Ok);

    NodeStatus {
        node_id: t.node_id.clone(),
        state,
        alerts,
        directives,
        component_loads: loads,
        last_seen: t.last_seen,
        jobs: job_refs,
        temp_c: t.num("temp_c"),
        missing_fields,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOW: i64 = 1_000 * NANOS_PER_SECOND;

    fn nominal() -> NodeTelemetry {
        let mut values = BTreeMap::new();
        values.insert("load1".into(), FieldValue::Float(20.0));
        values.insert("mem_free_pct".into(), FieldValue::Float(50.0));
        values.insert("disk_free_pct".into(), FieldValue::Float(60.0));
        values.insert("temp_c".into(), FieldValue::Float(45.0));
        values.insert("power_w".into(), FieldValue::Float(300.0));
        values.insert("stack_version".into(), FieldValue::String("2021.1".into()));
        values.insert("mounts".into(), FieldValue::String("/home,/scratch".into()));
        NodeTelemetry {
            node_id: "n001".into(),
            profile: "xeon-p8260".into(),
            cores: 48,
            gpus: 0,
            last_seen: Some(NOW - NANOS_PER_SECOND),
            values,
            hw_events: BTreeMap::new(),
        }
    }

    fn eval(t: &NodeTelemetry) -> NodeStatus {
        evaluate_node(t, &[], &Thresholds::default(), NOW)
    }

    #[test]
    fn nominal_node_is_ok() {
        let s = eval(&nominal());
        assert_eq!(s.state, Severity::Ok);
        assert!(s.alerts.is_empty());
        assert!(s.missing_fields.is_empty());
        assert_eq!(s.temp_c, Some(45.0));
    }

    #[test]
    fn silent_node_goes_offline() {
        let mut t = nominal();
        t.last_seen = Some(NOW - 120 * NANOS_PER_SECOND);
        let s = eval(&t);
        assert_eq!(s.state, Severity::Offline);
        assert_eq!(s.alert_kinds(), vec![AlertKind::Offline]);
        assert!(s
            .directives
            .contains(&VisualDirective::text(DirectiveKind::WholeNodeColor, "node", "red")));

        t.last_seen = None;
        assert_eq!(eval(&t).state, Severity::Offline);
    }

    #[test]
    fn exactly_at_timeout_is_still_online() {
        let mut t = nominal();
        t.last_seen = Some(NOW - 60 * NANOS_PER_SECOND);
        assert_eq!(eval(&t).state, Severity::Ok);
    }

    #[test]
    fn low_memory_fill_level() {
        let mut t = nominal();
        t.values.insert("mem_free_pct".into(), FieldValue::Float(5.0));
        let s = eval(&t);
        assert_eq!(s.state, Severity::Warn);
        assert_eq!(s.alert_kinds(), vec![AlertKind::LowMemory]);
        assert!(s
            .directives
            .contains(&VisualDirective::scalar(DirectiveKind::FillLevel, "memory", 0.05)));
    }

    #[test]
    fn temperature_crit() {
        let mut t = nominal();
        t.values.insert("temp_c".into(), FieldValue::Float(85.0));
        let s = eval(&t);
        assert_eq!(s.state, Severity::Crit);
        assert_eq!(s.alert_kinds(), vec![AlertKind::Temperature]);

        t.values.insert("temp_c".into(), FieldValue::Float(70.0));
        let s = eval(&t);
        assert_eq!(s.state, Severity::Warn);
    }

    #[test]
    fn cpu_fan_speed_proportional() {
        let mut t = nominal();
        t.values.insert("load1".into(), FieldValue::Float(96.0));
        let s = eval(&t);
        assert_eq!(s.alert_kinds(), vec![AlertKind::CpuLoad]);
        assert!(s
            .directives
            .contains(&VisualDirective::scalar(DirectiveKind::FanSpeed, "cpu", 1.0)));

        t.values.insert("load1".into(), FieldValue::Float(73.0));
        let s = eval(&t);
        let fan = s.directives.iter().find(|d| d.kind == DirectiveKind::FanSpeed).unwrap();
        assert_eq!(fan.value, DirectiveValue::Scalar(73.0 / 96.0));
    }

    #[test]
    fn gpu_rule_only_with_gpus() {
        let mut t = nominal();
        t.values.insert("gpu_util".into(), FieldValue::Float(99.0));
        assert!(eval(&t).alerts.is_empty());
        t.gpus = 2;
        t.profile = "gaia-v100".into();
        assert_eq!(eval(&t).alert_kinds(), vec![AlertKind::GpuLoad]);
    }

    #[test]
    fn version_mount_power_disk_hw() {
        let mut t = nominal();
        t.values
            .insert("stack_version".into(), FieldValue::String("2020.4".into()));
        assert_eq!(eval(&t).alert_kinds(), vec![AlertKind::VersionOutOfSync]);

        let mut t = nominal();
        t.values.insert("mounts".into(), FieldValue::String("/home".into()));
        let s = eval(&t);
        assert_eq!(s.alert_kinds(), vec![AlertKind::MountMissing]);
        assert_eq!(s.state, Severity::Crit);

        let mut t = nominal();
        t.values.insert("power_w".into(), FieldValue::Float(650.0));
        assert_eq!(eval(&t).alert_kinds(), vec![AlertKind::PowerUsage]);

        let mut t = nominal();
        t.values.insert("disk_free_pct".into(), FieldValue::Float(3.0));
        assert_eq!(eval(&t).alert_kinds(), vec![AlertKind::StorageLow]);

        let mut t = nominal();
        t.hw_events.insert(
            "dimm3".into(),
            HwEvent {
                severity: 2,
                acked: false,
                timestamp: 0,
            },
        );
        let s = eval(&t);
        assert_eq!(s.alert_kinds(), vec![AlertKind::HardwareProblem]);
        assert!(s.directives.contains(&VisualDirective::text(
            DirectiveKind::ComponentHighlight,
            "dimm3",
            "red"
        )));
        t.hw_events.get_mut("dimm3").unwrap().acked = true;
        assert!(eval(&t).alerts.is_empty());
    }

    #[test]
    fn jobs_get_textures_and_hot_jobs_alert() {
        let t = nominal();
        let jobs = vec![
            JobActivity {
                job_id: "23159087".into(),
                user: "u42".into(),
                open_rate_10m: Some(893_817.0),
            },
            JobActivity {
                job_id: "1".into(),
                user: "u1".into(),
                open_rate_10m: Some(10.0),
            },
        ];
        let s = evaluate_node(&t, &jobs, &Thresholds::default(), NOW);
        assert_eq!(s.alert_kinds(), vec![AlertKind::JobOccupancy]);
        let textures = s.directives.iter().filter(|d| d.kind == DirectiveKind::Texture).count();
        assert_eq!(textures, 2);
        assert_eq!(s.jobs.len(), 2);
    }

    #[test]
    fn missing_fields_reported_not_alerted() {
        let mut t = nominal();
        t.values.remove("temp_c");
        t.values.remove("mounts");
        let s = eval(&t);
        assert!(s.alerts.is_empty());
        assert_eq!(s.missing_fields, vec!["temp_c", "mounts"]);
    }

    #[test]
    fn scalar_directives_clamped() {
        let d = VisualDirective::scalar(DirectiveKind::FillLevel, "x", 3.0);
        assert_eq!(d.value, DirectiveValue::Scalar(1.0));
        let d = VisualDirective::scalar(DirectiveKind::FillLevel, "x", -1.0);
        assert_eq!(d.value, DirectiveValue::Scalar(0.0));
    }
}
