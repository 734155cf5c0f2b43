//! Runtime state of one simulated node.

use std::collections::VecDeque;

use super::config::{to_uj, EnergyModel, NodeConfig};
use crate::model::TaskManifest;
use crate::wire::{SlotReport, SlotStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotPhase {
    Deploying,
    Idle,
    Running,
    /// Extracted by MIGOUT; occupies the slot until deleted or thawed.
    Frozen {
        was_running: bool,
    },
}

#[derive(Debug, Clone)]
pub struct SlotState {
    pub manifest: TaskManifest,
    pub(crate) manifest_bytes: Vec<u8>,
    pub phase: SlotPhase,
    pub next_seq: u32,
    /// Threshold rule value at the previous sample.
    pub(crate) rule_active: bool,
    /// Bumped whenever pending timers for the slot must be invalidated.
    pub(crate) gen: u64,
    pub(crate) cap_index: usize,
}

impl SlotState {
    pub fn report(&self) -> SlotReport {
        let status = match self.phase {
            SlotPhase::Deploying => SlotStatus::Deploying,
            SlotPhase::Idle => SlotStatus::Idle,
            SlotPhase::Running => SlotStatus::Running,
            SlotPhase::Frozen { .. } => SlotStatus::Frozen,
        };
        SlotReport {
            status,
            next_seq: self.next_seq,
        }
    }
}

/// A frame waiting for the node to wake up.
#[derive(Debug, Clone)]
pub(crate) struct Inbound {
    pub frame: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultState {
    pub corrupt_inbound: u32,
    pub reject_migin: u32,
    pub start_brownout: u32,
}

#[derive(Debug, Clone)]
pub struct NodeRuntime {
    config: NodeConfig,
    pub(crate) slots: Vec<Option<SlotState>>,
    initial_uj: u64,
    pub(crate) battery_uj: u64,
    reserve_uj: u64,
    pub(crate) samples_taken: u64,
    pub(crate) commands_executed: u64,
    pub(crate) depleted: bool,
    pub(crate) queue: VecDeque<Inbound>,
    pub(crate) faults: FaultState,
}

impl NodeRuntime {
    pub(crate) fn new(config: NodeConfig, energy: &EnergyModel) -> Self {
        let initial_uj = to_uj(config.battery_j);
        let reserve_uj = to_uj(energy.reserve_j);
        NodeRuntime {
            slots: vec![None; config.capacity() as usize],
            initial_uj,
            battery_uj: initial_uj,
            reserve_uj,
            samples_taken: 0,
            commands_executed: 0,
            depleted: initial_uj < reserve_uj,
            queue: VecDeque::new(),
            faults: FaultState::default(),
            config,
        }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn id(&self) -> &str {
        &self.config.node_id
    }

    pub fn capacity(&self) -> u8 {
        self.config.capacity()
    }

    pub fn slot(&self, slot: u8) -> Option<&SlotState> {
        self.slots.get(slot as usize).and_then(|s| s.as_ref())
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub(crate) fn first_free(&self) -> Option<u8> {
        self.slots.iter().position(|s| s.is_none()).map(|i| i as u8)
    }

    pub fn initial_battery_uj(&self) -> u64 {
        self.initial_uj
    }

    pub fn battery_remaining_uj(&self) -> u64 {
        self.battery_uj
    }

    pub fn battery_remaining_j(&self) -> f64 {
        self.battery_uj as f64 / 1e6
    }

    pub fn battery_fraction(&self) -> f64 {
        if self.initial_uj == 0 {
            0.0
        } else {
            self.battery_uj as f64 / self.initial_uj as f64
        }
    }

    /// Fraction of the initial charge that is held back as reserve.
    pub fn reserve_fraction(&self) -> f64 {
        if self.initial_uj == 0 {
            1.0
        } else {
            self.reserve_uj as f64 / self.initial_uj as f64
        }
    }

    pub fn samples_taken(&self) -> u64 {
        self.samples_taken
    }

    pub fn commands_executed(&self) -> u64 {
        self.commands_executed
    }

    pub fn is_depleted(&self) -> bool {
        self.depleted
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub(crate) fn can_spend(&self, cost_uj: u64) -> bool {
        self.battery_uj >= self.reserve_uj && self.battery_uj >= cost_uj
    }

    /// Debits the battery; returns true if this crossed below the reserve.
    pub(crate) fn spend(&mut self, cost_uj: u64) -> bool {
        self.battery_uj -= cost_uj;
        if !self.depleted && self.battery_uj < self.reserve_uj {
            self.depleted = true;
            true
        } else {
            false
        }
    }
}
