//! Node configuration, topology files and the delay/energy profile.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Capability, GeoPoint, Platform, Unit};

pub const SPOTSIM_DEFAULT_CAPACITY: u8 = 4;
pub const MAX_CAPACITY: u8 = 254;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid node config for {node}: {reason}")]
    InvalidConfig { node: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot parse {what}: {reason}")]
    Parse { what: String, reason: String },
}

fn invalid(node: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidConfig {
        node: node.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalParams {
    pub base: f64,
    pub amplitude: f64,
    pub period_ms: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRange {
    pub min: u64,
    pub max: u64,
}

impl IntervalRange {
    pub fn contains(&self, ms: u64) -> bool {
        (self.min..=self.max).contains(&ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityDecl {
    pub capability: Capability,
    /// The first unit is the node-native unit the signal is expressed in.
    pub units: Vec<Unit>,
    pub sampling_interval_ms: IntervalRange,
    pub signal: SignalParams,
}

impl CapabilityDecl {
    pub fn native_unit(&self) -> Unit {
        self.units[0]
    }

    fn validate(&self, node: &str) -> Result<(), ConfigError> {
        if self.units.is_empty() {
            return Err(invalid(
                node,
                format!("{} declares no units", self.capability),
            ));
        }
        let mut seen = HashSet::new();
        for u in &self.units {
            if u.family() != self.capability {
                return Err(invalid(
                    node,
                    format!("unit {u} is not a {} unit", self.capability),
                ));
            }
            if !seen.insert(*u) {
                return Err(invalid(node, format!("duplicate unit {u}")));
            }
        }
        let r = self.sampling_interval_ms;
        if r.min == 0 || r.min > r.max {
            return Err(invalid(
                node,
                format!("bad sampling interval range {}..{}", r.min, r.max),
            ));
        }
        let s = &self.signal;
        if s.period_ms == 0 {
            return Err(invalid(node, "signal period must be positive"));
        }
        if !(s.base.is_finite() && s.amplitude.is_finite() && s.noise_sigma.is_finite())
            || s.noise_sigma < 0.0
        {
            return Err(invalid(
                node,
                "signal parameters must be finite, sigma >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DutyCycle {
    pub period_ms: u64,
    pub awake_ms: u64,
}

impl DutyCycle {
    pub fn always_on(&self) -> bool {
        self.awake_ms == self.period_ms
    }

    pub fn is_awake(&self, t_ms: u64) -> bool {
        t_ms % self.period_ms < self.awake_ms
    }

    /// Earliest instant >= `t_ms` at which the node is awake.
    pub fn next_awake(&self, t_ms: u64) -> u64 {
        if self.is_awake(t_ms) {
            t_ms
        } else {
            t_ms - t_ms % self.period_ms + self.period_ms
        }
    }

    /// Next wake/sleep edge strictly after `t_ms`, with the state entered.
    pub fn next_edge(&self, t_ms: u64) -> Option<(u64, bool)> {
        if self.always_on() {
            return None;
        }
        let start = t_ms - t_ms % self.period_ms;
        let sleep_at = start + self.awake_ms;
        if t_ms < sleep_at {
            Some((sleep_at, false))
        } else {
            Some((start + self.period_ms, true))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    #[serde(rename = "id")]
    pub node_id: String,
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gto_parent: Option<String>,
    #[serde(rename = "capability")]
    pub capabilities: Vec<CapabilityDecl>,
    pub location: GeoPoint,
    pub battery_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty_cycle: Option<DutyCycle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u8>,
}

impl NodeConfig {
    pub fn capacity(&self) -> u8 {
        match self.platform {
            Platform::Spotsim => self.capacity.unwrap_or(SPOTSIM_DEFAULT_CAPACITY),
            Platform::Motesim => 1,
        }
    }

    pub fn capability(&self, c: Capability) -> Option<&CapabilityDecl> {
        self.capabilities.iter().find(|d| d.capability == c)
    }

    pub fn is_awake(&self, t_ms: u64) -> bool {
        self.duty_cycle.is_none_or(|d| d.is_awake(t_ms))
    }

    pub fn next_awake(&self, t_ms: u64) -> u64 {
        self.duty_cycle.map_or(t_ms, |d| d.next_awake(t_ms))
    }

    /// Checks everything that can be checked without the rest of the topology.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let id = &self.node_id;
        if id.is_empty() || id.len() > 255 || id.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(invalid(
                id,
                "node id must be 1..=255 bytes without whitespace or '/'",
            ));
        }
        match self.platform {
            Platform::Spotsim => {
                if self.gto_parent.is_some() {
                    return Err(invalid(id, "only motesim nodes have a GTO parent"));
                }
                if let Some(c) = self.capacity {
                    if c == 0 || c > MAX_CAPACITY {
                        return Err(invalid(id, format!("capacity must be 1..={MAX_CAPACITY}")));
                    }
                }
            }
            Platform::Motesim => {
                if self.gto_parent.is_none() {
                    return Err(invalid(id, "motesim node requires a GTO parent"));
                }
                if self.capacity.is_some_and(|c| c != 1) {
                    return Err(invalid(id, "motesim capacity is fixed at 1"));
                }
            }
        }
        if self.capabilities.is_empty() {
            return Err(invalid(id, "at least one capability is required"));
        }
        let mut seen = HashSet::new();
        for c in &self.capabilities {
            if !seen.insert(c.capability) {
                return Err(invalid(
                    id,
                    format!("duplicate capability {}", c.capability),
                ));
            }
            c.validate(id)?;
        }
        if !self.battery_j.is_finite() || self.battery_j < 0.0 {
            return Err(invalid(id, "battery_j must be a finite value >= 0"));
        }
        if let Some(d) = self.duty_cycle {
            if d.period_ms == 0 || d.awake_ms == 0 || d.awake_ms > d.period_ms {
                return Err(invalid(id, "duty cycle needs 0 < awake_ms <= period_ms"));
            }
        }
        Ok(())
    }
}

/// Topology document: `[[node]]` tables in TOML.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    #[serde(rename = "node", default)]
    pub nodes: Vec<NodeConfig>,
}

impl Topology {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            what: "topology".into(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology serializes")
    }

    /// Nodes in spawn order: every GTO parent before its children.
    pub fn spawn_order(&self) -> Vec<&NodeConfig> {
        let (mut first, rest): (Vec<_>, Vec<_>) = self
            .nodes
            .iter()
            .partition(|n| n.platform == Platform::Spotsim);
        first.extend(rest);
        first
    }
}

/// Per-platform latency model, in virtual milliseconds.
///
/// Deploy latency is `build_ms + per_kb_ms * manifest_kb + sync_ms`; start
/// latency is `start_sync_ms`; every other command takes `command_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformDelays {
    pub build_ms: u64,
    pub per_kb_ms: u64,
    pub sync_ms: u64,
    pub start_sync_ms: u64,
    pub command_ms: u64,
}

impl PlatformDelays {
    pub fn deploy_ms(&self, manifest_kb: u64) -> u64 {
        self.build_ms + self.per_kb_ms * manifest_kb + self.sync_ms
    }

    pub const ZERO: PlatformDelays = PlatformDelays {
        build_ms: 0,
        per_kb_ms: 0,
        sync_ms: 0,
        start_sync_ms: 0,
        command_ms: 0,
    };
}

impl Default for PlatformDelays {
    /// Capable-node defaults: a 1 KB manifest deploys in 14 973 ms and a
    /// start takes 4 200 ms.
    fn default() -> Self {
        PlatformDelays {
            build_ms: 11_000,
            per_kb_ms: 473,
            sync_ms: 3_500,
            start_sync_ms: 4_200,
            command_ms: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub sample_j: f64,
    pub command_j: f64,
    pub reserve_j: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            sample_j: 0.005,
            command_j: 0.02,
            reserve_j: 1.0,
        }
    }
}

/// Joules to integer microjoules; all battery arithmetic is done in µJ so
/// the books balance exactly.
pub fn to_uj(j: f64) -> u64 {
    (j * 1e6).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimProfile {
    pub spotsim: PlatformDelays,
    pub motesim: PlatformDelays,
    pub energy: EnergyModel,
    /// Standard deviation of the Gaussian jitter added to deploy and start
    /// latencies; truncated at 2.5 sigma.
    pub jitter_sigma_ms: f64,
    pub seed: u64,
    pub queue_depth: usize,
}

impl Default for SimProfile {
    fn default() -> Self {
        SimProfile {
            spotsim: PlatformDelays::default(),
            motesim: PlatformDelays {
                build_ms: 2_000,
                per_kb_ms: 800,
                sync_ms: 500,
                start_sync_ms: 300,
                command_ms: 50,
            },
            energy: EnergyModel::default(),
            jitter_sigma_ms: 0.0,
            seed: 0,
            queue_depth: 32,
        }
    }
}

impl SimProfile {
    /// Every latency zero; handy in tests that only care about ordering.
    pub fn instant() -> Self {
        SimProfile {
            spotsim: PlatformDelays::ZERO,
            motesim: PlatformDelays::ZERO,
            ..SimProfile::default()
        }
    }

    pub fn delays(&self, p: Platform) -> &PlatformDelays {
        match p {
            Platform::Spotsim => &self.spotsim,
            Platform::Motesim => &self.motesim,
        }
    }
}
