use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rules::{AlertKind, NodeStatus, Severity};

/// Cluster-wide counts. Only non-zero counts are present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRollup {
    pub states: BTreeMap<Severity, usize>,
    pub alerts: BTreeMap<AlertKind, usize>,
    /// Sorted node ids carrying each active alert kind.
    pub alert_nodes: BTreeMap<AlertKind, Vec<String>>,
}

pub fn cluster_rollup<'a, I>(statuses: I) -> ClusterRollup
where
    I: IntoIterator<Item = &'a NodeStatus>,
{
    let mut r = ClusterRollup::default();
    for s in statuses {
        *r.states.entry(s.state).or_default() += 1;
        let mut kinds = s.alert_kinds();
        kinds.dedup();
        for k in kinds {
            *r.alerts.entry(k).or_default() += 1;
            r.alert_nodes.entry(k).or_default().push(s.node_id.clone());
        }
    }
    for nodes in r.alert_nodes.values_mut() {
        nodes.sort();
    }
    r
}
