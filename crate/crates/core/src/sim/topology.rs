use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;

/// Hardware shape of a node type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub name: String,
    pub cores: u32,
    pub ram_gb: u32,
    pub gpus: u32,
    pub gpu_model: String,
    pub local_disk_gb: u32,
}

fn p(name: &str, cores: u32, ram_gb: u32, gpus: u32, gpu_model: &str, disk: u32) -> NodeProfile {
    NodeProfile {
        name: name.to_owned(),
        cores,
        ram_gb,
        gpus,
        gpu_model: gpu_model.to_owned(),
        local_disk_gb: disk,
    }
}

pub const DEFAULT_PROFILE: &str = "xeon-p8260";

/// Built-in node types.
pub fn builtin_profiles() -> Vec<NodeProfile> {
    vec![
        // Dual-socket Xeon Platinum 8260.
        p("xeon-p8260", 48, 192, 0, "", 480),
        p("gaia-v100", 40, 384, 2, "V100", 960),
        p("xeon-phi-7210", 64, 192, 0, "", 240),
        p("xeon-e5-2683", 32, 256, 0, "", 480),
        p("bigmem-e7", 72, 3072, 0, "", 1920),
    ]
}

pub fn find_profile(name: &str) -> Option<NodeProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

/// Input to [`build_topology`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologySpec {
    pub racks: u32,
    pub nodes_per_rack: u32,
    /// Profile names with relative weights.
    pub profiles: Vec<(String, f64)>,
    pub seed: u64,
    pub sensors_per_rack: u32,
    pub metadata_servers: u32,
    pub object_servers: u32,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            racks: 2,
            nodes_per_rack: 48,
            profiles: vec![(DEFAULT_PROFILE.to_owned(), 1.0)],
            seed: 1,
            sensors_per_rack: 4,
            metadata_servers: 2,
            object_servers: 8,
        }
    }
}

impl TopologySpec {
    pub fn uniform(racks: u32, nodes_per_rack: u32, profile: &str, seed: u64) -> Self {
        TopologySpec {
            racks,
            nodes_per_rack,
            profiles: vec![(profile.to_owned(), 1.0)],
            seed,
            ..Default::default()
        }
    }

    pub fn node_count(&self) -> u64 {
        u64::from(self.racks) * u64::from(self.nodes_per_rack)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub id: String,
    pub rack: String,
    pub profile: NodeProfile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rack {
    pub id: String,
    pub nodes: Vec<NodeDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSensor {
    pub id: String,
    pub rack: String,
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTopology {
    pub racks: Vec<Rack>,
    pub metadata_servers: Vec<String>,
    pub object_servers: Vec<String>,
    pub sensors: Vec<EnvSensor>,
}

impl ClusterTopology {
    pub fn nodes(&self) -> impl Iterator<Item = &NodeDescriptor> + '_ {
        self.racks.iter().flat_map(|r| r.nodes.iter())
    }

    pub fn node(&self, id: &str) -> Option<&NodeDescriptor> {
        self.nodes().find(|n| n.id == id)
    }

    pub fn node_count(&self) -> usize {
        self.racks.iter().map(|r| r.nodes.len()).sum()
    }

    pub fn total_cores(&self) -> u64 {
        self.nodes().map(|n| u64::from(n.profile.cores)).sum()
    }

    /// Hex SHA-256 over node ids, racks and profiles.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for n in self.nodes() {
            h.update(n.id.as_bytes());
            h.update(b"\t");
            h.update(n.rack.as_bytes());
            h.update(b"\t");
            h.update(n.profile.name.as_bytes());
            h.update(b"\n");
        }
        for s in &self.sensors {
            h.update(s.id.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// FNV-1a, used to derive per-entity random substreams.
pub(crate) fn substream_seed(seed: u64, salt: &str, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.rotate_left(17);
    for b in salt.bytes().chain([0u8]).chain(id.bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn width(n: u64, min: usize) -> usize {
    n.to_string().len().max(min)
}

/// Lays out racks and nodes. Node ids are `n` plus a zero-padded global
/// index; profiles are drawn per node from its own substream, so growing the
/// cluster never changes existing nodes.
pub fn build_topology(spec: &TopologySpec) -> Result<ClusterTopology, SimError> {
    if spec.racks == 0 || spec.nodes_per_rack == 0 {
        return Err(SimError::InvalidSpec("racks and nodes-per-rack must be >= 1".into()));
    }
    if spec.profiles.is_empty() {
        return Err(SimError::InvalidSpec("at least one profile is required".into()));
    }
    let mut mix = Vec::with_capacity(spec.profiles.len());
    for (name, weight) in &spec.profiles {
        let prof = find_profile(name).ok_or_else(|| SimError::UnknownProfile(name.clone()))?;
        if !(*weight > 0.0 && weight.is_finite()) {
            return Err(SimError::InvalidSpec(format!("profile {name} has weight {weight}")));
        }
        mix.push((prof, *weight));
    }
    let total_weight: f64 = mix.iter().map(|(_, w)| w).sum();

    let node_w = width(spec.node_count(), 3);
    let rack_w = width(u64::from(spec.racks), 2);
    let mut racks = Vec::with_capacity(spec.racks as usize);
    let mut sensors = Vec::new();
    let mut idx: u64 = 0;
    for r in 0..spec.racks {
        let rack_id = format!("r{:0rack_w$}", r + 1);
        let mut nodes = Vec::with_capacity(spec.nodes_per_rack as usize);
        for _ in 0..spec.nodes_per_rack {
            idx += 1;
            let id = format!("n{idx:0node_w$}");
            let profile = if mix.len() == 1 {
                mix[0].0.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(spec.seed, "profile", &id));
                let mut x = rng.random::<f64>() * total_weight;
                let mut chosen = &mix[mix.len() - 1].0;
                for (prof, w) in &mix {
                    if x < *w {
                        chosen = prof;
                        break;
                    }
                    x -= w;
                }
                chosen.clone()
            };
            nodes.push(NodeDescriptor {
                id,
                rack: rack_id.clone(),
                profile,
            });
        }
        for s in 0..spec.sensors_per_rack {
            let location = if s % 2 == 0 { "inlet" } else { "outlet" };
            sensors.push(EnvSensor {
                id: format!("{rack_id}-{location}-{}", s / 2 + 1),
                rack: rack_id.clone(),
                location: location.to_owned(),
            });
        }
        racks.push(Rack { id: rack_id, nodes });
    }
    Ok(ClusterTopology {
        racks,
        metadata_servers: (1..=spec.metadata_servers).map(|i| format!("mds{i:02}")).collect(),
        object_servers: (1..=spec.object_servers).map(|i| format!("oss{i:02}")).collect(),
        sensors,
    })
}
