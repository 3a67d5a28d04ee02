//! Threshold alerting: per-node health states, alerts and visual directives,
//! plus cluster-wide roll-ups.

mod rollup;
mod rules;
mod thresholds;

pub use rollup::{cluster_rollup, ClusterRollup};
pub use rules::{
    evaluate_node, parse_mounts, Alert, AlertKind, DirectiveKind, DirectiveValue, HwEvent, JobActivity, JobRef,
    NodeStatus, NodeTelemetry, Severity, VisualDirective, HW_SEVERITY_CRIT, HW_SEVERITY_WARN,
};
pub use thresholds::{
    default_mounts, load_thresholds, thresholds_from_value, Effective, ProfileOverrides, ThresholdError, Thresholds,
    DEFAULT_STACK_VERSION,
};
