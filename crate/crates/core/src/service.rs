//! The assembled IaaS: simulation, registry, manager, provider and
//! scheduler behind one facade.
//!
//! All lifecycle operations take `&mut self`; the simulation is driven only
//! from inside them. The registry and address map are shared handles that
//! can be read concurrently without going through the facade.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::manager::{DataSink, Manager, ManagerError};
use crate::metrics::{Metrics, MetricsView};
use crate::model::{
    AddressError, AddressMap, GlobalAddress, LifecycleEvent, VirtualSensorRecord, VsState, VsView,
};
use crate::profile::Scenario;
use crate::provisioning::{
    configure, ConfigureError, CreateRequest, EntryStatus, Provider, ScheduleError, Scheduler,
    SelectError,
};
use crate::registry::{
    DiscoveryQuery, LiveStatus, Registry, RegistryError, SensorDescription, SensorView,
};
use crate::sim::{ConfigError, EventKind, Fault, NodeConfig, Sim, SimError, SimEvent, Topology};

const UUID_SALT: u64 = 0x7673_5f69_6473;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("no virtual sensor {0:?}")]
    VsNotFound(String),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Configure(#[from] ConfigureError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Address(#[from] AddressError),
}

/// Machine-readable error codes exposed over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadRequest,
    InvalidQuery,
    InvalidConfig,
    NotFound,
    UnknownNode,
    UnknownSchedule,
    IllegalTransition,
    AlreadyFired,
    AlreadyCancelled,
    DuplicateNode,
    InvalidParams,
    UnsupportedCapability,
    IntervalOutOfRange,
    UnitUnsupported,
    UnsupportedPlatform,
    PastDue,
    CorruptSnapshot,
    NoCandidateNode,
    NodeCapacity,
    NodeEnergy,
    NodeUnreachable,
    ProtocolError,
    TargetCapacity,
    TargetEnergy,
    QueueFull,
    SnapshotIo,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 26] = [
        ErrorCode::BadRequest,
        ErrorCode::InvalidQuery,
        ErrorCode::InvalidConfig,
        ErrorCode::NotFound,
        ErrorCode::UnknownNode,
        ErrorCode::UnknownSchedule,
        ErrorCode::IllegalTransition,
        ErrorCode::AlreadyFired,
        ErrorCode::AlreadyCancelled,
        ErrorCode::DuplicateNode,
        ErrorCode::InvalidParams,
        ErrorCode::UnsupportedCapability,
        ErrorCode::IntervalOutOfRange,
        ErrorCode::UnitUnsupported,
        ErrorCode::UnsupportedPlatform,
        ErrorCode::PastDue,
        ErrorCode::CorruptSnapshot,
        ErrorCode::NoCandidateNode,
        ErrorCode::NodeCapacity,
        ErrorCode::NodeEnergy,
        ErrorCode::NodeUnreachable,
        ErrorCode::ProtocolError,
        ErrorCode::TargetCapacity,
        ErrorCode::TargetEnergy,
        ErrorCode::QueueFull,
        ErrorCode::SnapshotIo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "BAD_REQUEST",
            ErrorCode::InvalidQuery => "INVALID_QUERY",
            ErrorCode::InvalidConfig => "INVALID_CONFIG",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::UnknownNode => "UNKNOWN_NODE",
            ErrorCode::UnknownSchedule => "UNKNOWN_SCHEDULE",
            ErrorCode::IllegalTransition => "ILLEGAL_TRANSITION",
            ErrorCode::AlreadyFired => "ALREADY_FIRED",
            ErrorCode::AlreadyCancelled => "ALREADY_CANCELLED",
            ErrorCode::DuplicateNode => "DUPLICATE_NODE",
            ErrorCode::InvalidParams => "INVALID_PARAMS",
            ErrorCode::UnsupportedCapability => "UNSUPPORTED_CAPABILITY",
            ErrorCode::IntervalOutOfRange => "INTERVAL_OUT_OF_RANGE",
            ErrorCode::UnitUnsupported => "UNIT_UNSUPPORTED",
            ErrorCode::UnsupportedPlatform => "UNSUPPORTED_PLATFORM",
            ErrorCode::PastDue => "PAST_DUE",
            ErrorCode::CorruptSnapshot => "CORRUPT_SNAPSHOT",
            ErrorCode::NoCandidateNode => "NO_CANDIDATE_NODE",
            ErrorCode::NodeCapacity => "NODE_CAPACITY",
            ErrorCode::NodeEnergy => "NODE_ENERGY",
            ErrorCode::NodeUnreachable => "NODE_UNREACHABLE",
            ErrorCode::ProtocolError => "PROTOCOL_ERROR",
            ErrorCode::TargetCapacity => "TARGET_CAPACITY",
            ErrorCode::TargetEnergy => "TARGET_ENERGY",
            ErrorCode::QueueFull => "QUEUE_FULL",
            ErrorCode::SnapshotIo => "SNAPSHOT_IO",
        }
    }
}

impl ServiceError {
    pub fn code(&self) -> ErrorCode {
        use ErrorCode as C;
        match self {
            ServiceError::BadRequest(_) => C::BadRequest,
            ServiceError::VsNotFound(_) => C::NotFound,
            ServiceError::Select(e) => match e {
                SelectError::InvalidRequest(_) => C::InvalidParams,
                SelectError::UnknownNode(_) => C::UnknownNode,
                SelectError::NoCandidateNode => C::NoCandidateNode,
                SelectError::Registry(e) => registry_code(e),
            },
            ServiceError::Configure(e) => match e {
                ConfigureError::InvalidParams(_) => C::InvalidParams,
                ConfigureError::UnsupportedCapability { .. } => C::UnsupportedCapability,
                ConfigureError::IntervalOutOfRange { .. } => C::IntervalOutOfRange,
                ConfigureError::UnitUnsupported(_) => C::UnitUnsupported,
            },
            ServiceError::Manager(e) => match e {
                ManagerError::IllegalTransition(_) => C::IllegalTransition,
                ManagerError::UnknownNode(_) => C::UnknownNode,
                ManagerError::NodeCapacity(_) => C::NodeCapacity,
                ManagerError::NodeEnergy(_) => C::NodeEnergy,
                ManagerError::QueueFull(_) => C::QueueFull,
                ManagerError::NodeUnreachable(_) => C::NodeUnreachable,
                ManagerError::ProtocolError { .. } => C::ProtocolError,
                ManagerError::UnsupportedPlatform(_) => C::UnsupportedPlatform,
                ManagerError::TargetCapacity(_) => C::TargetCapacity,
                ManagerError::TargetEnergy(_) => C::TargetEnergy,
            },
            ServiceError::Schedule(e) => match e {
                ScheduleError::PastDue { .. } => C::PastDue,
                ScheduleError::UnknownId(_) => C::UnknownSchedule,
                ScheduleError::AlreadyFired(_) => C::AlreadyFired,
                ScheduleError::AlreadyCancelled(_) => C::AlreadyCancelled,
            },
            ServiceError::Registry(e) => registry_code(e),
            ServiceError::Sim(e) => match e {
                SimError::UnknownNode(_) => C::UnknownNode,
                SimError::DuplicateNodeId(_) => C::DuplicateNode,
                SimError::InvalidConfig(_) => C::InvalidConfig,
                SimError::NotDirectlyReachable(_)
                | SimError::NotRelayParent(..)
                | SimError::Wire(_) => C::ProtocolError,
            },
            ServiceError::Config(_) => C::InvalidConfig,
            ServiceError::Address(_) => C::InvalidConfig,
        }
    }
}

fn registry_code(e: &RegistryError) -> ErrorCode {
    match e {
        RegistryError::DuplicateNodeId(_) => ErrorCode::DuplicateNode,
        RegistryError::UnknownNode(_) => ErrorCode::UnknownNode,
        RegistryError::InvalidQuery(_) => ErrorCode::InvalidQuery,
        RegistryError::IoFailure { .. } => ErrorCode::SnapshotIo,
        RegistryError::CorruptSnapshot(_) => ErrorCode::CorruptSnapshot,
    }
}

/// Lifecycle action the scheduler can run later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScheduledAction {
    /// Full creation, honouring the request's own start settings.
    Create {
        request: CreateRequest,
    },
    /// Configure and deploy only; the VS stays Deployed.
    Disseminate {
        request: CreateRequest,
    },
    Start {
        vs_id: String,
    },
    Stop {
        vs_id: String,
    },
    Delete {
        vs_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleView {
    pub schedule_id: u64,
    pub due_ms: u64,
    pub status: EntryStatus,
    pub fired_at_ms: Option<u64>,
    pub outcome: Option<String>,
    #[serde(flatten)]
    pub action: ScheduledAction,
}

pub struct Infrastructure {
    scenario: Scenario,
    manager: Manager,
    registry: Arc<Registry>,
    records: BTreeMap<Uuid, VirtualSensorRecord>,
    provider: Provider,
    scheduler: Scheduler<ScheduledAction>,
    metrics: Metrics,
    rng: ChaCha8Rng,
    trace: Option<Vec<SimEvent>>,
}

impl Infrastructure {
    pub fn new(
        scenario: Scenario,
        topology: &Topology,
        sink: Box<dyn DataSink>,
    ) -> Result<Self, ServiceError> {
        scenario.validate()?;
        GlobalAddress::new(&scenario.iaas_id, Uuid::nil())?;
        let sim = Sim::new(scenario.sim_profile());
        let registry = Arc::new(Registry::new(sim.clock(), scenario.grace_ms));
        let mut infra = Infrastructure {
            manager: Manager::new(sim, scenario.link(), sink),
            registry,
            records: BTreeMap::new(),
            provider: Provider::new(scenario.cache_capacity),
            scheduler: Scheduler::new(),
            metrics: Metrics::default(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed ^ UUID_SALT),
            trace: None,
            scenario,
        };
        for node in topology.spawn_order() {
            infra.add_node(node.clone())?;
        }
        Ok(infra)
    }

    pub fn add_node(&mut self, config: NodeConfig) -> Result<(), ServiceError> {
        let id = self.manager.sim_mut().spawn_node(config)?;
        let node = self.manager.sim().node(&id).expect("just spawned");
        self.registry
            .register(SensorDescription::from_runtime(node))?;
        self.sync();
        Ok(())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn registry(&self) -> Arc<Registry> {
        Arc::clone(&self.registry)
    }

    pub fn address_map(&self) -> Arc<AddressMap> {
        Arc::clone(self.manager.map())
    }

    pub fn manager(&self) -> &Manager {
        &self.manager
    }

    pub fn sim(&self) -> &Sim {
        self.manager.sim()
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn now(&self) -> u64 {
        self.manager.now()
    }

    pub fn set_sink(&mut self, sink: Box<dyn DataSink>) {
        self.manager.router_mut().set_sink(sink);
    }

    /// Starts or stops recording every simulation event.
    pub fn set_trace(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<SimEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn inject_fault(&mut self, node_id: &str, fault: Fault) -> Result<(), ServiceError> {
        Ok(self.manager.sim_mut().inject_fault(node_id, fault)?)
    }

    fn next_uuid(&mut self) -> Uuid {
        let mut b = [0u8; 16];
        self.rng.fill_bytes(&mut b);
        uuid::Builder::from_random_bytes(b).into_uuid()
    }

    fn parse_id(vs_id: &str) -> Result<Uuid, ServiceError> {
        Uuid::parse_str(vs_id).map_err(|_| ServiceError::VsNotFound(vs_id.to_string()))
    }

    /// Pushes dirty node state into the registry and reacts to events.
    fn sync(&mut self) {
        let events = self.manager.drain_events();
        for ev in &events {
            if ev.kind == EventKind::EnergyDepleted {
                self.on_depleted(&ev.node_id);
            }
        }
        if let Some(t) = self.trace.as_mut() {
            t.extend(events);
        }
        let now = self.now();
        for id in self.manager.sim_mut().take_dirty() {
            if let Some(node) = self.manager.sim().node(&id) {
                let _ = self.registry.update_live(&id, LiveStatus::of(node, now));
            }
        }
        for rec in self.records.values_mut() {
            if let Some(r) = self.manager.router().route(&rec.global) {
                rec.last_seq = r.last_seq;
            }
        }
    }

    fn on_depleted(&mut self, node_id: &str) {
        log::warn!("node {node_id} fell below its energy reserve");
        for rec in self.records.values_mut() {
            if rec.local.as_ref().is_some_and(|l| l.node_id == node_id) {
                if let Some(r) = self.manager.router().route(&rec.global) {
                    rec.last_seq = r.last_seq;
                }
                self.manager.fault(rec);
            }
        }
    }

    /// Syncs, then runs every scheduled entry that fell due meanwhile.
    fn settle(&mut self) {
        self.sync();
        while let Some((id, action)) = self.scheduler.pop_due(self.now()) {
            let outcome = match self.run_action(action) {
                Ok(s) => s,
                Err(e) => {
                    self.metrics.counters.failures += 1;
                    format!("error {}: {e}", e.code().as_str())
                }
            };
            self.scheduler.record_outcome(id, outcome);
            self.sync();
        }
    }

    fn run_action(&mut self, action: ScheduledAction) -> Result<String, ServiceError> {
        Ok(match action {
            ScheduledAction::Create { request } => self.create_inner(request)?.state.to_string(),
            ScheduledAction::Disseminate { mut request } => {
                request.autostart = false;
                request.start_at = None;
                self.create_inner(request)?.state.to_string()
            }
            ScheduledAction::Start { vs_id } => self.start_inner(&vs_id)?.state.to_string(),
            ScheduledAction::Stop { vs_id } => self.stop_inner(&vs_id)?.state.to_string(),
            ScheduledAction::Delete { vs_id } => {
                self.delete_inner(&vs_id)?;
                VsState::Deleted.to_string()
            }
        })
    }

    fn counted<T>(&mut self, r: Result<T, ServiceError>) -> Result<T, ServiceError> {
        if r.is_err() {
            self.metrics.counters.failures += 1;
        }
        self.settle();
        r
    }

    // ---- discovery ----

    pub fn sensors(&self, q: &DiscoveryQuery) -> Result<Vec<SensorView>, ServiceError> {
        Ok(self.registry.query_views(q)?)
    }

    pub fn sensor(&self, node_id: &str) -> Option<SensorView> {
        self.registry.view(node_id)
    }

    // ---- lifecycle ----

    pub fn create(&mut self, req: CreateRequest) -> Result<VsView, ServiceError> {
        let r = self.create_inner(req);
        self.counted(r)
    }

    fn create_inner(&mut self, req: CreateRequest) -> Result<VsView, ServiceError> {
        let received = self.now();
        let selector = req.selector()?;
        req.task.validate()?;
        if let Some(at) = req.start_at {
            if at < received {
                return Err(ScheduleError::PastDue {
                    due_ms: at,
                    now_ms: received,
                }
                .into());
            }
        }
        let node = self.provider.select(&self.registry, &selector)?;
        let id = self.next_uuid();
        let manifest = configure(&req.task, &node, id)?;
        let global = GlobalAddress::new(&self.scenario.iaas_id, id)?;
        let mut rec = VirtualSensorRecord::new(
            global,
            manifest,
            req.task.unit,
            req.app_id.clone(),
            received,
        );
        rec.apply(LifecycleEvent::Configure, received)
            .expect("a new record accepts configure");
        let setup = !self.manager.session_open();
        if let Err(e) = self.manager.instantiate(&mut rec, &node.node_id) {
            if rec.state() == VsState::Faulted {
                self.records.insert(id, rec);
            }
            return Err(e.into());
        }
        let done = self.now();
        let vs_id = id.hyphenated().to_string();
        self.metrics
            .vscd
            .push(Metrics::sample(vs_id.clone(), received, done, setup));
        self.records.insert(id, rec);
        self.sync();

        if let Some(at) = req.start_at {
            let due = at.max(self.now());
            self.scheduler.schedule(
                ScheduledAction::Start {
                    vs_id: vs_id.clone(),
                },
                due,
                self.now(),
            )?;
        } else if req.autostart {
            if let Err(e) = self.start_inner(&vs_id) {
                // keep creation all-or-nothing
                let undone = match self.records.get_mut(&id) {
                    Some(rec) if rec.state() == VsState::Deployed => {
                        self.manager.delete(rec).is_ok()
                    }
                    _ => false,
                };
                if undone {
                    self.records.remove(&id);
                }
                return Err(e);
            }
        }
        self.metrics.counters.creates += 1;
        Ok(self.records[&id].view())
    }

    pub fn get(&self, vs_id: &str) -> Result<VsView, ServiceError> {
        let id = Self::parse_id(vs_id)?;
        self.records
            .get(&id)
            .map(|r| r.view())
            .ok_or_else(|| ServiceError::VsNotFound(vs_id.to_string()))
    }

    pub fn list(&self) -> Vec<VsView> {
        self.records.values().map(|r| r.view()).collect()
    }

    pub fn start(&mut self, vs_id: &str) -> Result<VsView, ServiceError> {
        let r = self.start_inner(vs_id);
        self.counted(r)
    }

    fn start_inner(&mut self, vs_id: &str) -> Result<VsView, ServiceError> {
        let received = self.now();
        let setup = !self.manager.session_open();
        let id = Self::parse_id(vs_id)?;
        let rec = self
            .records
            .get_mut(&id)
            .ok_or_else(|| ServiceError::VsNotFound(vs_id.to_string()))?;
        self.manager.start(rec)?;
        let view = rec.view();
        let done = self.now();
        self.metrics
            .vsst
            .push(Metrics::sample(view.vs_id.clone(), received, done, setup));
        self.metrics.counters.starts += 1;
        Ok(view)
    }

    pub fn stop(&mut self, vs_id: &str) -> Result<VsView, ServiceError> {
        let r = self.stop_inner(vs_id);
        self.counted(r)
    }

    fn stop_inner(&mut self, vs_id: &str) -> Result<VsView, ServiceError> {
        let id = Self::parse_id(vs_id)?;
        let rec = self
            .records
            .get_mut(&id)
            .ok_or_else(|| ServiceError::VsNotFound(vs_id.to_string()))?;
        self.manager.stop(rec)?;
        self.metrics.counters.stops += 1;
        Ok(rec.view())
    }

    /// Deletes a Deployed or Stopped VS. The record is gone afterwards.
    pub fn delete(&mut self, vs_id: &str) -> Result<(), ServiceError> {
        let r = self.delete_inner(vs_id);
        self.counted(r)
    }

    fn delete_inner(&mut self, vs_id: &str) -> Result<(), ServiceError> {
        let id = Self::parse_id(vs_id)?;
        let rec = self
            .records
            .get_mut(&id)
            .ok_or_else(|| ServiceError::VsNotFound(vs_id.to_string()))?;
        self.manager.delete(rec)?;
        self.records.remove(&id);
        self.metrics.counters.deletes += 1;
        Ok(())
    }

    pub fn migrate(&mut self, vs_id: &str, target_node: &str) -> Result<VsView, ServiceError> {
        let r = self.migrate_inner(vs_id, target_node);
        self.counted(r)
    }

    fn migrate_inner(&mut self, vs_id: &str, target: &str) -> Result<VsView, ServiceError> {
        let id = Self::parse_id(vs_id)?;
        let rec = self
            .records
            .get_mut(&id)
            .ok_or_else(|| ServiceError::VsNotFound(vs_id.to_string()))?;
        self.manager.migrate(rec, target)?;
        self.metrics.counters.migrations += 1;
        Ok(rec.view())
    }

    // ---- scheduling ----

    pub fn schedule(&mut self, action: ScheduledAction, due_ms: u64) -> Result<u64, ServiceError> {
        match &action {
            ScheduledAction::Start { vs_id }
            | ScheduledAction::Stop { vs_id }
            | ScheduledAction::Delete { vs_id } => {
                self.get(vs_id)?;
            }
            ScheduledAction::Create { request } | ScheduledAction::Disseminate { request } => {
                request.selector()?;
                request.task.validate()?;
            }
        }
        let id = self.scheduler.schedule(action, due_ms, self.now())?;
        // an entry due right now runs immediately
        self.settle();
        Ok(id)
    }

    pub fn cancel_schedule(&mut self, id: u64) -> Result<(), ServiceError> {
        Ok(self.scheduler.cancel(id)?)
    }

    pub fn schedule_entry(&self, id: u64) -> Option<ScheduleView> {
        self.scheduler.get(id).map(|e| ScheduleView {
            schedule_id: e.id,
            due_ms: e.due_ms,
            status: e.status,
            fired_at_ms: e.fired_at_ms,
            outcome: e.outcome.clone(),
            action: e.action.clone(),
        })
    }

    // ---- clock and session ----

    /// Runs the infrastructure to `t`. Simulation events fire before
    /// scheduled entries due at the same instant.
    pub fn advance_to(&mut self, t: u64) {
        loop {
            let sim_next = self.manager.next_event_time().filter(|d| *d <= t);
            let due = self.scheduler.next_due().filter(|d| *d <= t);
            match (sim_next, due) {
                (Some(s), Some(d)) if s <= d => {
                    self.manager.step(s);
                }
                (_, Some(d)) => {
                    self.manager.run_until(d);
                    self.settle();
                }
                (Some(s), None) => {
                    self.manager.step(s);
                }
                (None, None) => break,
            }
            self.sync();
        }
        self.manager.run_until(t);
        self.settle();
    }

    pub fn advance(&mut self, dt_ms: u64) {
        self.advance_to(self.now() + dt_ms);
    }

    /// Opens the shared base-station session; returns whether it was closed.
    pub fn open_session(&mut self) -> bool {
        let opened = self.manager.open_session();
        self.settle();
        opened
    }

    pub fn close_session(&mut self) -> bool {
        self.manager.close_session()
    }

    pub fn session_open(&self) -> bool {
        self.manager.session_open()
    }

    // ---- metrics and persistence ----

    pub fn metrics(&self) -> MetricsView {
        MetricsView {
            now_ms: self.now(),
            counters: self.metrics.counters,
            vscd: self.metrics.vscd.clone(),
            vsst: self.metrics.vsst.clone(),
            data: self.manager.router().stats().into(),
            cache: self.provider.cache_stats().into(),
        }
    }

    pub fn snapshot(&self, path: &std::path::Path) -> Result<(), ServiceError> {
        Ok(self.registry.snapshot(path)?)
    }
}
