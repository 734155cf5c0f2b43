use serde::{Deserialize, Serialize};

use crate::model::{Capability, GeoPoint, Platform, Unit};
use crate::sim::{CapabilityDecl, NodeConfig, NodeRuntime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Spotsim,
    MotesimViaGto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    TextLine,
    Tlv,
}

/// Live fields fed from the simulation. Unknown until the first update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiveStatus {
    /// Occupied slots, whatever their phase.
    pub active_vs: u32,
    pub battery_fraction: f64,
    /// Earliest virtual instant at which the node is awake; `<= now` while
    /// it is awake.
    pub next_awake_at_ms: u64,
}

impl LiveStatus {
    pub fn of(node: &NodeRuntime, now_ms: u64) -> Self {
        LiveStatus {
            active_vs: node.occupied() as u32,
            battery_fraction: node.battery_fraction(),
            next_awake_at_ms: node.config().next_awake(now_ms),
        }
    }
}

/// Published record of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorDescription {
    pub node_id: String,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gto_parent: Option<String>,
    pub protocol: Protocol,
    pub data_format: DataFormat,
    pub capabilities: Vec<CapabilityDecl>,
    pub location: GeoPoint,
    pub capacity: u8,
    /// Share of the initial charge held back as reserve.
    pub reserve_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live: Option<LiveStatus>,
}

impl SensorDescription {
    pub fn from_config(config: &NodeConfig, reserve_fraction: f64) -> Self {
        let (protocol, data_format) = match config.platform {
            Platform::Spotsim => (Protocol::Spotsim, DataFormat::TextLine),
            Platform::Motesim => (Protocol::MotesimViaGto, DataFormat::Tlv),
        };
        SensorDescription {
            node_id: config.node_id.clone(),
            platform: config.platform,
            gto_parent: config.gto_parent.clone(),
            protocol,
            data_format,
            capabilities: config.capabilities.clone(),
            location: config.location,
            capacity: config.capacity(),
            reserve_fraction,
            live: None,
        }
    }

    pub fn from_runtime(node: &NodeRuntime) -> Self {
        Self::from_config(node.config(), node.reserve_fraction())
    }

    pub fn capability(&self, c: Capability) -> Option<&CapabilityDecl> {
        self.capabilities.iter().find(|d| d.capability == c)
    }

    pub fn supports(&self, c: Capability, u: Unit) -> bool {
        self.capability(c).is_some_and(|d| d.units.contains(&u))
    }

    pub fn active_vs(&self) -> Option<u32> {
        self.live.map(|l| l.active_vs)
    }

    pub fn load(&self) -> Option<f64> {
        self.live.map(|l| l.active_vs as f64 / self.capacity as f64)
    }

    pub fn battery_fraction(&self) -> Option<f64> {
        self.live.map(|l| l.battery_fraction)
    }

    /// Above reserve and awake now or within `grace_ms`. Unknown live state
    /// counts as unavailable.
    pub fn available(&self, now_ms: u64, grace_ms: u64) -> bool {
        self.live.is_some_and(|l| {
            l.battery_fraction > self.reserve_fraction
                && l.next_awake_at_ms <= now_ms.saturating_add(grace_ms)
        })
    }

    /// Copy with the computed fields filled in, as served to clients.
    pub fn view(&self, now_ms: u64, grace_ms: u64, center: Option<GeoPoint>) -> SensorView {
        SensorView {
            load: self.load(),
            available: self.available(now_ms, grace_ms),
            distance_m: center.map(|c| crate::model::geo_distance_m(c, self.location)),
            description: self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorView {
    #[serde(flatten)]
    pub description: SensorDescription,
    pub load: Option<f64>,
    pub available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
}
