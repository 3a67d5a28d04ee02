use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold overrides for one node profile. Unset keys inherit the base
/// value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mem_free_warn_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_load_per_core_warn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gpu_util_warn_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disk_free_warn_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_warn_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_crit_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_warn_w: Option<f64>,
}

impl ProfileOverrides {
    fn merge(&mut self, other: &ProfileOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            mem_free_warn_pct,
            cpu_load_per_core_warn,
            gpu_util_warn_pct,
            disk_free_warn_pct,
            temp_warn_c,
            temp_crit_c,
            power_warn_w
        );
    }
}

/// Alert threshold configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub heartbeat_timeout_s: f64,
    pub mem_free_warn_pct: f64,
    pub cpu_load_per_core_warn: f64,
    pub gpu_util_warn_pct: f64,
    pub disk_free_warn_pct: f64,
    pub temp_warn_c: f64,
    pub temp_crit_c: f64,
    /// Base power limit; GPU profiles override it in `profiles`.
    pub power_warn_w: f64,
    pub open_rate_warn_per_10m: f64,
    pub reference_stack_version: String,
    pub expected_mounts: Vec<String>,
    pub profiles: BTreeMap<String, ProfileOverrides>,
}

pub const DEFAULT_STACK_VERSION: &str = "2021.1";

pub fn default_mounts() -> Vec<String> {
    vec!["/home".to_owned(), "/scratch".to_owned()]
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            heartbeat_timeout_s: 60.0,
            mem_free_warn_pct: 10.0,
            cpu_load_per_core_warn: 1.5,
            gpu_util_warn_pct: 95.0,
            disk_free_warn_pct: 10.0,
            temp_warn_c: 70.0,
            temp_crit_c: 80.0,
            power_warn_w: 500.0,
            open_rate_warn_per_10m: 100_000.0,
            reference_stack_version: DEFAULT_STACK_VERSION.to_owned(),
            expected_mounts: default_mounts(),
            profiles: BTreeMap::from([(
                "gaia-v100".to_owned(),
                ProfileOverrides {
                    power_warn_w: Some(1100.0),
                    ..Default::default()
                },
            )]),
        }
    }
}

/// Thresholds with profile overrides applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effective {
    pub heartbeat_timeout_s: f64,
    pub mem_free_warn_pct: f64,
    pub cpu_load_per_core_warn: f64,
    pub gpu_util_warn_pct: f64,
    pub disk_free_warn_pct: f64,
    pub temp_warn_c: f64,
    pub temp_crit_c: f64,
    pub power_warn_w: f64,
    pub open_rate_warn_per_10m: f64,
}

/// Every invariant violation found in a threshold document.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ThresholdError {
    pub violations: Vec<String>,
}

impl fmt::Display for ThresholdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid thresholds: {}", self.violations.join("; "))
    }
}

impl ThresholdError {
    fn one(msg: impl Into<String>) -> Self {
        ThresholdError {
            violations: vec![msg.into()],
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ThresholdsDoc {
    heartbeat_timeout_s: Option<f64>,
    mem_free_warn_pct: Option<f64>,
    cpu_load_per_core_warn: Option<f64>,
    gpu_util_warn_pct: Option<f64>,
    disk_free_warn_pct: Option<f64>,
    temp_warn_c: Option<f64>,
    temp_crit_c: Option<f64>,
    power_warn_w: Option<f64>,
    open_rate_warn_per_10m: Option<f64>,
    reference_stack_version: Option<String>,
    expected_mounts: Option<Vec<String>>,
    profiles: Option<BTreeMap<String, ProfileOverrides>>,
}

impl Thresholds {
    pub fn for_profile(&self, profile: &str) -> Effective {
        let o = self.profiles.get(profile);
        let pick = |base: f64, f: fn(&ProfileOverrides) -> Option<f64>| o.and_then(f).unwrap_or(base);
        Effective {
            heartbeat_timeout_s: self.heartbeat_timeout_s,
            mem_free_warn_pct: pick(self.mem_free_warn_pct, |o| o.mem_free_warn_pct),
            cpu_load_per_core_warn: pick(self.cpu_load_per_core_warn, |o| o.cpu_load_per_core_warn),
            gpu_util_warn_pct: pick(self.gpu_util_warn_pct, |o| o.gpu_util_warn_pct),
            disk_free_warn_pct: pick(self.disk_free_warn_pct, |o| o.disk_free_warn_pct),
            temp_warn_c: pick(self.temp_warn_c, |o| o.temp_warn_c),
            temp_crit_c: pick(self.temp_crit_c, |o| o.temp_crit_c),
            power_warn_w: pick(self.power_warn_w, |o| o.power_warn_w),
            open_rate_warn_per_10m: self.open_rate_warn_per_10m,
        }
    }

    /// Checks the invariants on the base values and on every profile.
    pub fn validate(&self) -> Result<(), ThresholdError> {
        let mut v = Vec::new();
        if !(self.heartbeat_timeout_s > 0.0 && self.heartbeat_timeout_s.is_finite()) {
            v.push(format!(
                "heartbeat_timeout_s must be > 0 (got {})",
                self.heartbeat_timeout_s
            ));
        }
        if !(self.open_rate_warn_per_10m >= 0.0 && self.open_rate_warn_per_10m.is_finite()) {
            v.push(format!(
                "open_rate_warn_per_10m must be >= 0 (got {})",
                self.open_rate_warn_per_10m
            ));
        }
        let mut scopes: Vec<(String, Effective)> = vec![(String::new(), self.for_profile(""))];
        for name in self.profiles.keys() {
            scopes.push((format!("profiles.{name}."), self.for_profile(name)));
        }
        let mut base_msgs: Vec<String> = Vec::new();
        for (prefix, e) in scopes {
            let mut push = |msg: String| {
                // A profile that merely inherits a bad base value is not
                // reported twice.
                if prefix.is_empty() {
                    base_msgs.push(msg.clone());
                    v.push(msg);
                } else if !base_msgs.contains(&msg) {
                    v.push(format!("{prefix}{msg}"));
                }
            };
            for (key, val) in [
                ("mem_free_warn_pct", e.mem_free_warn_pct),
                ("gpu_util_warn_pct", e.gpu_util_warn_pct),
                ("disk_free_warn_pct", e.disk_free_warn_pct),
            ] {
                if !(0.0..=100.0).contains(&val) {
                    push(format!("{key} must be within [0, 100] (got {val})"));
                }
            }
            for (key, val) in [
                ("cpu_load_per_core_warn", e.cpu_load_per_core_warn),
                ("power_warn_w", e.power_warn_w),
            ] {
                if !(val > 0.0 && val.is_finite()) {
                    push(format!("{key} must be > 0 (got {val})"));
                }
            }
            if e.temp_warn_c.partial_cmp(&e.temp_crit_c) != Some(std::cmp::Ordering::Less) {
                push(format!(
                    "temperature: warn < crit violated (temp_warn_c {} >= temp_crit_c {})",
                    e.temp_warn_c, e.temp_crit_c
                ));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ThresholdError { violations: v })
        }
    }
}

/// Parses a JSON threshold document. Absent keys keep their defaults;
/// `profiles` entries merge over the built-in profile overrides.
pub fn load_thresholds(config_text: &str) -> Result<Thresholds, ThresholdError> {
    let doc: ThresholdsDoc = serde_json::from_str(config_text).map_err(|e| ThresholdError::one(e.to_string()))?;
    thresholds_from_doc(doc)
}

/// Same as [`load_thresholds`] for an already-parsed JSON value.
pub fn thresholds_from_value(value: serde_json::Value) -> Result<Thresholds, ThresholdError> {
    let doc: ThresholdsDoc = serde_json::from_value(value).map_err(|e| ThresholdError::one(e.to_string()))?;
    thresholds_from_doc(doc)
}

fn thresholds_from_doc(doc: ThresholdsDoc) -> Result<Thresholds, ThresholdError> {
    let mut t = Thresholds::default();
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(x) = doc.$f { t.$f = x; } )* };
    }
    set!(
        heartbeat_timeout_s,
        mem_free_warn_pct,
        cpu_load_per_core_warn,
        gpu_util_warn_pct,
        disk_free_warn_pct,
        temp_warn_c,
        temp_crit_c,
        power_warn_w,
        open_rate_warn_per_10m,
        reference_stack_version,
        expected_mounts
    );
    for (name, o) in doc.profiles.unwrap_or_default() {
        t.profiles.entry(name).or_default().merge(&o);
    }
    t.validate()?;
    Ok(t)
}
