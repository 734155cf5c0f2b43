//! Scenario file: delay, energy and service settings in one TOML document.
//!
//! ```toml
//! iaas_id = "vwsn"
//! seed = 42
//! base_station_setup_ms = 9309
//!
//! [spotsim]
//! build_ms = 11000
//! per_kb_ms = 473
//! sync_ms = 3500
//! start_sync_ms = 4200
//! command_ms = 100
//! ```
//!
//! Every key is optional; missing keys take the defaults shown by
//! `Scenario::default()`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::manager::LinkConfig;
use crate::provisioning::DEFAULT_CACHE_CAPACITY;
use crate::registry::DEFAULT_GRACE_MS;
use crate::sim::{ConfigError, EnergyModel, PlatformDelays, SimProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub iaas_id: String,
    pub seed: u64,
    pub jitter_sigma_ms: f64,
    pub queue_depth: usize,
    pub base_station_setup_ms: u64,
    pub reply_timeout_ms: u64,
    pub retries: u32,
    pub grace_ms: u64,
    pub cache_capacity: usize,
    pub spotsim: PlatformDelays,
    pub motesim: PlatformDelays,
    pub energy: EnergyModel,
}

impl Default for Scenario {
    fn default() -> Self {
        let sim = SimProfile::default();
        let link = LinkConfig::default();
        Scenario {
            iaas_id: "vwsn".into(),
            seed: sim.seed,
            jitter_sigma_ms: sim.jitter_sigma_ms,
            queue_depth: sim.queue_depth,
            base_station_setup_ms: link.base_station_setup_ms,
            reply_timeout_ms: link.reply_timeout_ms,
            retries: link.retries,
            grace_ms: DEFAULT_GRACE_MS,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            spotsim: sim.spotsim,
            motesim: sim.motesim,
            energy: sim.energy,
        }
    }
}

impl Scenario {
    /// All latencies zero, including the session setup.
    pub fn instant() -> Self {
        Scenario {
            base_station_setup_ms: 0,
            spotsim: PlatformDelays::ZERO,
            motesim: PlatformDelays::ZERO,
            ..Scenario::default()
        }
    }

    pub fn sim_profile(&self) -> SimProfile {
        SimProfile {
            spotsim: self.spotsim,
            motesim: self.motesim,
            energy: self.energy,
            jitter_sigma_ms: self.jitter_sigma_ms,
            seed: self.seed,
            queue_depth: self.queue_depth,
        }
    }

    pub fn link(&self) -> LinkConfig {
        LinkConfig {
            base_station_setup_ms: self.base_station_setup_ms,
            reply_timeout_ms: self.reply_timeout_ms,
            retries: self.retries,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |reason: &str| {
            Err(ConfigError::Parse {
                what: "scenario".into(),
                reason: reason.into(),
            })
        };
        if self.iaas_id.is_empty() || self.iaas_id.contains(['/', ' ']) {
            return bad("iaas_id must be non-empty without '/' or spaces");
        }
        if !(self.jitter_sigma_ms.is_finite() && self.jitter_sigma_ms >= 0.0) {
            return bad("jitter_sigma_ms must be finite and >= 0");
        }
        let e = self.energy;
        if ![e.sample_j, e.command_j, e.reserve_j]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return bad("energy costs must be finite and >= 0");
        }
        if self.reply_timeout_ms == 0 {
            return bad("reply_timeout_ms must be positive");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse {
            what: "scenario".into(),
            reason: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_partial() {
        let s = Scenario::default();
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        let p = Scenario::from_toml("seed = 9\n[spotsim]\nbuild_ms = 1\n").unwrap();
        assert_eq!(p.seed, 9);
        assert_eq!(p.spotsim.build_ms, 1);
        assert_eq!(p.spotsim.per_kb_ms, 473);
        assert!(Scenario::from_toml("bogus = 1\n").is_err());
    }
}
