//! Discrete-event simulation of the sensor infrastructure: capable SPOTSIM
//! nodes and constrained MOTESIM nodes behind a GTO parent.

mod clock;
pub mod config;
mod engine;
mod node;
pub mod signal;

pub use clock::VirtualClock;
pub use config::{
    to_uj, CapabilityDecl, ConfigError, DutyCycle, EnergyModel, IntervalRange, NodeConfig,
    PlatformDelays, SignalParams, SimProfile, Topology,
};
pub use engine::{EventKind, Fault, Output, OutputKind, Sim, SimError, SimEvent, SkipReason};
pub use node::{FaultState, NodeRuntime, SlotPhase, SlotState};
