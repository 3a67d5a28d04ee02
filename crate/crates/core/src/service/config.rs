use serde::{Deserialize, Serialize};

use crate::alert::{thresholds_from_value, Thresholds};
use crate::sim::TopologySpec;

use super::ServiceError;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8086";

/// Service configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Threshold document; absent keys keep their defaults.
    pub thresholds: serde_json::Value,
    pub topology: TopologySpec,
    pub cadence_ms: u64,
    pub retention_s: u64,
    /// Per-subscriber stream queue length.
    pub stream_queue: usize,
    pub heartbeat_s: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.to_owned(),
            thresholds: serde_json::Value::Object(Default::default()),
            topology: TopologySpec::default(),
            cadence_ms: 1000,
            retention_s: 24 * 3600,
            stream_queue: 65_536,
            heartbeat_s: 10,
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let cfg: ServiceConfig = serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        if cfg.cadence_ms == 0 {
            return Err(ServiceError::Config("cadence_ms must be > 0".into()));
        }
        if cfg.stream_queue == 0 {
            return Err(ServiceError::Config("stream_queue must be > 0".into()));
        }
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Result<Thresholds, ServiceError> {
        Ok(thresholds_from_value(self.thresholds.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ServiceConfig::parse(r#"{"listen":"0.0.0.0:9000","topology":{"racks":1,"nodes_per_rack":4}}"#).unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.topology.node_count(), 4);
        assert_eq!(c.cadence_ms, 1000);
        assert_eq!(c.thresholds().unwrap(), Thresholds::default());
    }

    #[test]
    fn invalid_thresholds_surface() {
        let c = ServiceConfig::parse(r#"{"thresholds":{"temp_warn_c":90}}"#).unwrap();
        assert!(c.thresholds().is_err());
        assert!(ServiceConfig::parse(r#"{"bogus":1}"#).is_err());
    }
}
