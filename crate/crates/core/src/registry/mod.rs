//! Sensor description repository and discovery.
//!
//! One central repository behind a reader-writer lock: queries take a read
//! lock for their whole scan, so each sees a single point-in-time state.

mod description;

pub use description::{DataFormat, LiveStatus, Protocol, SensorDescription, SensorView};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{geo_distance_m, Capability, GeoPoint, Unit};
use crate::sim::VirtualClock;

pub const DEFAULT_GRACE_MS: u64 = 5_000;
pub const SNAPSHOT_FORMAT: &str = "vwsn-registry-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("node {0:?} is already registered")]
    DuplicateNodeId(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("snapshot i/o on {path}: {reason}")]
    IoFailure { path: String, reason: String },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

/// Discovery criteria; every present field must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryQuery {
    pub capability: Option<Capability>,
    pub unit: Option<Unit>,
    pub center: Option<GeoPoint>,
    pub radius_m: Option<f64>,
    /// The node must be able to sample at least this fast.
    pub max_interval_ms: Option<u64>,
    pub available_only: bool,
    pub min_battery: Option<f64>,
}

impl DiscoveryQuery {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |m: &str| Err(RegistryError::InvalidQuery(m.to_string()));
        if let Some(r) = self.radius_m {
            if self.center.is_none() {
                return invalid("radius_m requires a center");
            }
            if !r.is_finite() || r < 0.0 {
                return invalid("radius_m must be a finite value >= 0");
            }
        }
        if let Some(b) = self.min_battery {
            if !(0.0..=1.0).contains(&b) {
                return invalid("min_battery must lie in [0, 1]");
            }
        }
        if let (Some(c), Some(u)) = (self.capability, self.unit) {
            if u.family() != c {
                return invalid("unit does not belong to the capability");
            }
        }
        Ok(())
    }

    /// Whether `d` satisfies every present criterion at `now_ms`.
    pub fn matches(&self, d: &SensorDescription, now_ms: u64, grace_ms: u64) -> bool {
        let cap_ok = d.capabilities.iter().any(|c| {
            self.capability.is_none_or(|q| c.capability == q)
                && self.unit.is_none_or(|u| c.units.contains(&u))
                && self
                    .max_interval_ms
                    .is_none_or(|m| c.sampling_interval_ms.min <= m)
        });
        let geo_ok = match (self.center, self.radius_m) {
            (Some(c), Some(r)) => geo_distance_m(c, d.location) <= r,
            _ => true,
        };
        let battery_ok = self
            .min_battery
            .is_none_or(|m| d.battery_fraction().is_some_and(|b| b >= m));
        cap_ok && geo_ok && battery_ok && (!self.available_only || d.available(now_ms, grace_ms))
    }

    /// Stable textual form; equal queries give equal keys.
    pub fn canonical_key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DiscoveryQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref()
                .map_or_else(|| "-".to_string(), |x| x.to_string())
        }
        let center = self.center.map(|c| format!("{:?},{:?}", c.lat(), c.lon()));
        write!(
            f,
            "capability={};unit={};center={};radius_m={};max_interval_ms={};available_only={};min_battery={}",
            opt(&self.capability),
            opt(&self.unit),
            opt(&center),
            opt(&self.radius_m.map(|r| format!("{r:?}"))),
            opt(&self.max_interval_ms),
            self.available_only,
            opt(&self.min_battery.map(|b| format!("{b:?}"))),
        )
    }
}

/// Selection order: fewest active VSs, nearest to the query center, fullest
/// battery, then node id. Unknown live values sort as 0 VSs and empty battery.
pub fn selection_cmp(
    a: &SensorDescription,
    b: &SensorDescription,
    center: Option<GeoPoint>,
) -> Ordering {
    let dist = |d: &SensorDescription| center.map_or(0.0, |c| geo_distance_m(c, d.location));
    a.active_vs()
        .unwrap_or(0)
        .cmp(&b.active_vs().unwrap_or(0))
        .then_with(|| dist(a).total_cmp(&dist(b)))
        .then_with(|| {
            let bat = |d: &SensorDescription| d.battery_fraction().unwrap_or(0.0);
            bat(b).total_cmp(&bat(a))
        })
        .then_with(|| a.node_id.cmp(&b.node_id))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    format: String,
    version: u32,
    sensors: Vec<SensorDescription>,
}

#[derive(Debug)]
pub struct Registry {
    clock: VirtualClock,
    grace_ms: u64,
    sensors: RwLock<BTreeMap<String, SensorDescription>>,
}

impl Registry {
    pub fn new(clock: VirtualClock, grace_ms: u64) -> Self {
        Registry {
            clock,
            grace_ms,
            sensors: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn grace_ms(&self) -> u64 {
        self.grace_ms
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn len(&self) -> usize {
        self.sensors.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn register(&self, desc: SensorDescription) -> Result<(), RegistryError> {
        let mut s = self.sensors.write().unwrap();
        if s.contains_key(&desc.node_id) {
            return Err(RegistryError::DuplicateNodeId(desc.node_id));
        }
        s.insert(desc.node_id.clone(), desc);
        Ok(())
    }

    pub fn update_live(&self, node_id: &str, live: LiveStatus) -> Result<(), RegistryError> {
        let mut s = self.sensors.write().unwrap();
        let d = s
            .get_mut(node_id)
            .ok_or_else(|| RegistryError::UnknownNode(node_id.to_string()))?;
        d.live = Some(live);
        Ok(())
    }

    pub fn get(&self, node_id: &str) -> Option<SensorDescription> {
        self.sensors.read().unwrap().get(node_id).cloned()
    }

    pub fn view(&self, node_id: &str) -> Option<SensorView> {
        let now = self.now_ms();
        self.get(node_id).map(|d| d.view(now, self.grace_ms, None))
    }

    pub fn query(&self, q: &DiscoveryQuery) -> Result<Vec<SensorDescription>, RegistryError> {
        q.validate()?;
        let now = self.now_ms();
        let mut out: Vec<SensorDescription> = {
            let s = self.sensors.read().unwrap();
            s.values()
                .filter(|d| q.matches(d, now, self.grace_ms))
                .cloned()
                .collect()
        };
        out.sort_by(|a, b| selection_cmp(a, b, q.center));
        Ok(out)
    }

    pub fn query_views(&self, q: &DiscoveryQuery) -> Result<Vec<SensorView>, RegistryError> {
        let now = self.now_ms();
        Ok(self
            .query(q)?
            .into_iter()
            .map(|d| d.view(now, self.grace_ms, q.center))
            .collect())
    }

    /// Re-checks one node against `q` right now.
    pub fn satisfies(&self, node_id: &str, q: &DiscoveryQuery) -> bool {
        let now = self.now_ms();
        let s = self.sensors.read().unwrap();
        s.get(node_id)
            .is_some_and(|d| q.matches(d, now, self.grace_ms))
    }

    /// Static fields only, sorted by node id, as pretty JSON.
    pub fn snapshot_string(&self) -> String {
        let sensors = self
            .sensors
            .read()
            .unwrap()
            .values()
            .map(|d| SensorDescription {
                live: None,
                ..d.clone()
            })
            .collect();
        let doc = SnapshotDoc {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            sensors,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
        s.push('\n');
        s
    }

    pub fn snapshot(&self, path: &Path) -> Result<(), RegistryError> {
        std::fs::write(path, self.snapshot_string()).map_err(|e| RegistryError::IoFailure {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Replaces the contents with a snapshot; live fields become unknown.
    pub fn load_snapshot_str(&self, text: &str) -> Result<(), RegistryError> {
        let corrupt = |m: String| RegistryError::CorruptSnapshot(m);
        let doc: SnapshotDoc = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        if doc.format != SNAPSHOT_FORMAT {
            return Err(corrupt(format!("unexpected format {:?}", doc.format)));
        }
        if doc.version != SNAPSHOT_VERSION {
            return Err(corrupt(format!("unsupported version {}", doc.version)));
        }
        let mut map = BTreeMap::new();
        for mut d in doc.sensors {
            d.live = None;
            if map.insert(d.node_id.clone(), d).is_some() {
                return Err(corrupt("duplicate node id".into()));
            }
        }
        *self.sensors.write().unwrap() = map;
        Ok(())
    }

    pub fn load_snapshot(&self, path: &Path) -> Result<(), RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|e| RegistryError::IoFailure {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.load_snapshot_str(&text)
    }
}
