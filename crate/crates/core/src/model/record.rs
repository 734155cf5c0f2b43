use serde::Serialize;

use super::address::{GlobalAddress, LocalAddress};
use super::lifecycle::{IllegalTransition, Lifecycle, LifecycleEvent, VsState};
use super::manifest::TaskManifest;
use super::units::Unit;

/// One virtual sensor. A VS runs exactly one application task.
#[derive(Debug, Clone)]
pub struct VirtualSensorRecord {
    pub global: GlobalAddress,
    pub local: Option<LocalAddress>,
    lifecycle: Lifecycle,
    pub manifest: TaskManifest,
    /// Unit the application asked for; differs from `manifest.unit` when the
    /// data path converts.
    pub desired_unit: Unit,
    pub app_id: String,
    pub created_at: u64,
    pub state_changed_at: u64,
    pub last_seq: u32,
}

impl VirtualSensorRecord {
    pub fn new(
        global: GlobalAddress,
        manifest: TaskManifest,
        desired_unit: Unit,
        app_id: impl Into<String>,
        now_ms: u64,
    ) -> Self {
        VirtualSensorRecord {
            global,
            local: None,
            lifecycle: Lifecycle::new(),
            manifest,
            desired_unit,
            app_id: app_id.into(),
            created_at: now_ms,
            state_changed_at: now_ms,
            last_seq: 0,
        }
    }

    pub fn state(&self) -> VsState {
        self.lifecycle.state()
    }

    pub fn check(&self, event: LifecycleEvent) -> Result<(), IllegalTransition> {
        self.lifecycle.check(event)
    }

    pub fn apply(
        &mut self,
        event: LifecycleEvent,
        now_ms: u64,
    ) -> Result<VsState, IllegalTransition> {
        let s = self.lifecycle.apply(event)?;
        self.state_changed_at = now_ms;
        Ok(s)
    }

    pub fn view(&self) -> VsView {
        VsView {
            vs_id: self.global.vs_uuid().hyphenated().to_string(),
            global_address: self.global.to_string(),
            app_id: self.app_id.clone(),
            state: self.state(),
            node_id: self.local.as_ref().map(|l| l.node_id.clone()),
            slot: self.local.as_ref().map(|l| l.slot),
            capability: self.manifest.capability.as_str().to_string(),
            sampling_interval_ms: self.manifest.sampling_interval_ms,
            unit: self.desired_unit,
            node_unit: self.manifest.unit,
            endpoint: self.manifest.endpoint.clone(),
            created_at_ms: self.created_at,
            state_changed_at_ms: self.state_changed_at,
            last_seq: self.last_seq,
        }
    }
}

/// Serializable snapshot of a record as exposed to clients.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct VsView {
    pub vs_id: String,
    pub global_address: String,
    pub app_id: String,
    pub state: VsState,
    pub node_id: Option<String>,
    pub slot: Option<u8>,
    pub capability: String,
    pub sampling_interval_ms: u64,
    pub unit: Unit,
    pub node_unit: Unit,
    pub endpoint: String,
    pub created_at_ms: u64,
    pub state_changed_at_ms: u64,
    pub last_seq: u32,
}
