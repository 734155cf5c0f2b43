//! Core of a virtualized WSN infrastructure-as-a-service: the domain model,
//! the node wire protocols, a deterministic sensor simulation and the
//! management stack that provisions virtual sensors on top of it.

pub mod manager;
pub mod metrics;
pub mod model;
pub mod profile;
pub mod provisioning;
pub mod registry;
pub mod service;
pub mod sim;
pub mod wire;

pub use profile::Scenario;
pub use service::{ErrorCode, Infrastructure, ScheduledAction, ServiceError};
