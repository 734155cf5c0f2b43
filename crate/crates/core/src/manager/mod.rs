//! VS manager and communicator: drives lifecycle commands against the nodes
//! over their native protocols and owns the global/local address map.
//!
//! Every exchange is serial: the command is handed to the simulation and the
//! clock is stepped until the node's reply comes back. Data frames and other
//! events that fire meanwhile are routed as they happen.

mod router;

pub use router::{DataSink, DeliveredData, MemorySink, NullSink, Route, Router, RouterStats};

use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    AddressMap, GlobalAddress, IllegalTransition, LifecycleEvent, LocalAddress, Platform,
    VirtualSensorRecord, VsState,
};
use crate::sim::{EventKind, OutputKind, Sim, SimError, SimEvent};
use crate::wire::{
    codec_for, decode_migout_payload, unwrap_relay, wrap_relay, Command, ErrCode, MigrationState,
    Reply, WireError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManagerError {
    #[error(transparent)]
    IllegalTransition(#[from] IllegalTransition),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {0:?} has no free slot")]
    NodeCapacity(String),
    #[error("node {0:?} is below its energy reserve")]
    NodeEnergy(String),
    #[error("command queue of node {0:?} is full")]
    QueueFull(String),
    #[error("node {0:?} did not reply in time")]
    NodeUnreachable(String),
    #[error("protocol error with node {node:?}: {reason}")]
    ProtocolError { node: String, reason: String },
    #[error("migration is not supported on node {0:?}")]
    UnsupportedPlatform(String),
    #[error("migration target {0:?} has no free slot")]
    TargetCapacity(String),
    #[error("migration target {0:?} is below its energy reserve")]
    TargetEnergy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkConfig {
    /// Cost of establishing the shared base-station session.
    pub base_station_setup_ms: u64,
    pub reply_timeout_ms: u64,
    /// Extra attempts after a protocol error before the VS is faulted.
    pub retries: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            base_station_setup_ms: 9_309,
            reply_timeout_ms: 600_000,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationPhase {
    Extracted,
    Installed,
    Committed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationTicket {
    pub vs: GlobalAddress,
    pub source: LocalAddress,
    pub target: Option<LocalAddress>,
    pub serialized_state: Vec<u8>,
    pub phase: MigrationPhase,
}

pub struct Manager {
    sim: Sim,
    map: Arc<AddressMap>,
    router: Router,
    link: LinkConfig,
    session_open: bool,
    events: Vec<SimEvent>,
    last_ticket: Option<MigrationTicket>,
}

impl Manager {
    pub fn new(sim: Sim, link: LinkConfig, sink: Box<dyn DataSink>) -> Self {
        Manager {
            sim,
            map: Arc::new(AddressMap::new()),
            router: Router::new(sink),
            link,
            session_open: false,
            events: Vec::new(),
            last_ticket: None,
        }
    }

    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    /// Direct access for topology setup and fault injection. Events fired
    /// through this handle bypass routing.
    pub fn sim_mut(&mut self) -> &mut Sim {
        &mut self.sim
    }

    pub fn map(&self) -> &Arc<AddressMap> {
        &self.map
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    pub fn router_mut(&mut self) -> &mut Router {
        &mut self.router
    }

    pub fn link(&self) -> LinkConfig {
        self.link
    }

    pub fn now(&self) -> u64 {
        self.sim.now()
    }

    pub fn last_ticket(&self) -> Option<&MigrationTicket> {
        self.last_ticket.as_ref()
    }

    /// Every event fired since the last call, in firing order.
    pub fn drain_events(&mut self) -> Vec<SimEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn session_open(&self) -> bool {
        self.session_open
    }

    /// Opens the base-station session if needed; returns whether it did.
    pub fn open_session(&mut self) -> bool {
        if self.session_open {
            return false;
        }
        let until = self.sim.now() + self.link.base_station_setup_ms;
        self.run_until(until);
        self.session_open = true;
        true
    }

    pub fn close_session(&mut self) -> bool {
        std::mem::replace(&mut self.session_open, false)
    }

    pub fn next_event_time(&self) -> Option<u64> {
        self.sim.next_event_time()
    }

    /// Fires the earliest event if it is due by `limit`.
    pub fn step(&mut self, limit: u64) -> bool {
        match self.sim.fire_next(limit) {
            Some(evs) => {
                for ev in evs {
                    self.handle(ev, None);
                }
                true
            }
            None => false,
        }
    }

    /// Fires everything due up to `t` and moves the clock there.
    pub fn run_until(&mut self, t: u64) {
        while self.step(t) {}
        self.sim.advance_to(t);
    }

    /// Routes data, and returns the reply if the event carries the one from
    /// `awaiting`.
    fn handle(&mut self, ev: SimEvent, awaiting: Option<&str>) -> Option<Vec<u8>> {
        let mut reply = None;
        if let EventKind::Output(out) = &ev.kind {
            let inner = if out.relay {
                match unwrap_relay(&out.bytes) {
                    Ok((_, inner)) => inner,
                    Err(e) => {
                        log::warn!("dropping malformed relay frame from {}: {e}", out.radio);
                        &[][..]
                    }
                }
            } else {
                &out.bytes[..]
            };
            match out.kind {
                OutputKind::Data => {
                    let platform = self.sim.node(&ev.node_id).map(|n| n.config().platform);
                    match platform.map(|p| codec_for(p).decode_data(inner)) {
                        Some(Ok(frame)) => self.router.dispatch(&self.map, &ev.node_id, &frame),
                        Some(Err(e)) => log::warn!("undecodable data from {}: {e}", ev.node_id),
                        None => {}
                    }
                }
                OutputKind::Reply => {
                    if awaiting == Some(ev.node_id.as_str()) {
                        reply = Some(inner.to_vec());
                    } else {
                        log::debug!("unsolicited reply from {}", ev.node_id);
                    }
                }
            }
        }
        self.events.push(ev);
        reply
    }

    fn protocol(node: &str, reason: impl ToString) -> ManagerError {
        ManagerError::ProtocolError {
            node: node.to_string(),
            reason: reason.to_string(),
        }
    }

    fn exchange_once(
        &mut self,
        target: &str,
        cmd: &Command,
    ) -> Result<(u8, Vec<u8>), ManagerError> {
        let node = self
            .sim
            .node(target)
            .ok_or_else(|| ManagerError::UnknownNode(target.to_string()))?;
        let platform = node.config().platform;
        let parent = node.config().gto_parent.clone();
        let codec = codec_for(platform);
        let frame = codec.encode_command(cmd).map_err(|e| match e {
            WireError::Unsupported(_) => ManagerError::UnsupportedPlatform(target.to_string()),
            e => Self::protocol(target, e),
        })?;
        self.open_session();
        let sent = match &parent {
            Some(p) => {
                let wrapped = wrap_relay(target, &frame).map_err(|e| Self::protocol(target, e))?;
                self.sim.deliver(p, wrapped, true)
            }
            None => self.sim.deliver(target, frame, false),
        };
        sent.map_err(|e| match e {
            SimError::UnknownNode(n) => ManagerError::UnknownNode(n),
            e => Self::protocol(target, e),
        })?;
        let deadline = self.sim.now() + self.link.reply_timeout_ms;
        let bytes = loop {
            let Some(evs) = self.sim.fire_next(deadline) else {
                self.sim.advance_to(deadline);
                return Err(ManagerError::NodeUnreachable(target.to_string()));
            };
            let mut got = None;
            for ev in evs {
                if let Some(b) = self.handle(ev, Some(target)) {
                    got = Some(b);
                }
            }
            if let Some(b) = got {
                break b;
            }
        };
        match codec.decode_reply(&bytes) {
            Ok(Reply::Ok { slot, payload }) => Ok((slot, payload)),
            Ok(Reply::Err { code, text }) => Err(match code {
                ErrCode::Capacity => ManagerError::NodeCapacity(target.to_string()),
                ErrCode::Energy => ManagerError::NodeEnergy(target.to_string()),
                ErrCode::QueueFull => ManagerError::QueueFull(target.to_string()),
                ErrCode::BadFrame | ErrCode::NoSlot | ErrCode::Unsupported => {
                    Self::protocol(target, format!("{code} {text}"))
                }
            }),
            Err(e) => Err(Self::protocol(target, e)),
        }
    }

    /// One command with the retry policy applied to protocol errors.
    pub fn exchange(&mut self, target: &str, cmd: &Command) -> Result<(u8, Vec<u8>), ManagerError> {
        let mut attempt = 0;
        loop {
            match self.exchange_once(target, cmd) {
                Err(ManagerError::ProtocolError { node, reason })
                    if attempt < self.link.retries =>
                {
                    attempt += 1;
                    log::info!("retrying {} on {node} after: {reason}", cmd.name());
                }
                r => return r,
            }
        }
    }

    /// Faults the VS if the error is a protocol error, otherwise restores
    /// the record to how it was before the operation.
    fn settle(
        &mut self,
        rec: &mut VirtualSensorRecord,
        saved: VirtualSensorRecord,
        err: &ManagerError,
    ) {
        if matches!(err, ManagerError::ProtocolError { .. }) {
            self.fault(rec);
        } else {
            *rec = saved;
        }
    }

    /// Moves the VS to Faulted and releases its address binding. The slot on
    /// the node, if any, is left alone.
    pub fn fault(&mut self, rec: &mut VirtualSensorRecord) {
        let now = self.now();
        if rec.apply(LifecycleEvent::Fault, now).is_ok() {
            let _ = self.map.unbind(&rec.global);
            self.router.remove(&rec.global);
            rec.local = None;
        }
    }

    pub fn instantiate(
        &mut self,
        rec: &mut VirtualSensorRecord,
        target: &str,
    ) -> Result<LocalAddress, ManagerError> {
        rec.check(LifecycleEvent::DeployBegin)?;
        let saved = rec.clone();
        rec.apply(LifecycleEvent::DeployBegin, self.now())?;
        let cmd = Command::Deploy {
            slot: None,
            manifest: rec.manifest.to_bytes(),
        };
        match self.exchange(target, &cmd) {
            Ok((slot, _)) => {
                let local = LocalAddress::new(target, slot);
                if let Err(e) = self.map.bind(rec.global.clone(), local.clone()) {
                    let err = Self::protocol(target, e);
                    self.fault(rec);
                    return Err(err);
                }
                self.router.add(
                    rec.global.clone(),
                    rec.manifest.endpoint.clone(),
                    rec.desired_unit,
                );
                rec.local = Some(local.clone());
                rec.apply(LifecycleEvent::DeployOk, self.now())?;
                Ok(local)
            }
            Err(e) => {
                self.settle(rec, saved, &e);
                Err(e)
            }
        }
    }

    fn bound(rec: &VirtualSensorRecord) -> LocalAddress {
        rec.local
            .clone()
            .expect("a VS in a slot-holding state has a local address")
    }

    fn simple(
        &mut self,
        rec: &mut VirtualSensorRecord,
        event: LifecycleEvent,
        cmd: fn(u8) -> Command,
    ) -> Result<VsState, ManagerError> {
        rec.check(event)?;
        let local = Self::bound(rec);
        let saved = rec.clone();
        match self.exchange(&local.node_id, &cmd(local.slot)) {
            Ok(_) => Ok(rec.apply(event, self.now())?),
            Err(e) => {
                self.settle(rec, saved, &e);
                Err(e)
            }
        }
    }

    pub fn start(&mut self, rec: &mut VirtualSensorRecord) -> Result<VsState, ManagerError> {
        self.simple(rec, LifecycleEvent::StartOk, Command::Start)
    }

    pub fn stop(&mut self, rec: &mut VirtualSensorRecord) -> Result<VsState, ManagerError> {
        self.simple(rec, LifecycleEvent::StopOk, Command::Stop)
    }

    pub fn delete(&mut self, rec: &mut VirtualSensorRecord) -> Result<VsState, ManagerError> {
        rec.check(LifecycleEvent::DeleteBegin)?;
        let local = Self::bound(rec);
        let saved = rec.clone();
        rec.apply(LifecycleEvent::DeleteBegin, self.now())?;
        match self.exchange(&local.node_id, &Command::Delete(local.slot)) {
            Ok(_) => {
                let _ = self.map.unbind(&rec.global);
                self.router.remove(&rec.global);
                rec.local = None;
                Ok(rec.apply(LifecycleEvent::DeleteOk, self.now())?)
            }
            Err(e) => {
                self.settle(rec, saved, &e);
                Err(e)
            }
        }
    }

    fn platform_of(&self, node: &str) -> Result<Platform, ManagerError> {
        self.sim
            .node(node)
            .map(|n| n.config().platform)
            .ok_or_else(|| ManagerError::UnknownNode(node.to_string()))
    }

    /// Moves a running or stopped VS to another capable node, keeping its
    /// global address and sequence numbering. On an install failure the
    /// source slot is thawed and the VS carries on where it was.
    pub fn migrate(
        &mut self,
        rec: &mut VirtualSensorRecord,
        target: &str,
    ) -> Result<LocalAddress, ManagerError> {
        rec.check(LifecycleEvent::MigrateBegin)?;
        let source = Self::bound(rec);
        if self.platform_of(&source.node_id)? != Platform::Spotsim {
            return Err(ManagerError::UnsupportedPlatform(source.node_id));
        }
        if self.platform_of(target)? != Platform::Spotsim {
            return Err(ManagerError::UnsupportedPlatform(target.to_string()));
        }
        let saved = rec.clone();
        rec.apply(LifecycleEvent::MigrateBegin, self.now())?;

        let payload = match self.exchange(&source.node_id, &Command::MigOut(source.slot)) {
            Ok((_, p)) => p,
            Err(e) => {
                self.settle(rec, saved, &e);
                return Err(e);
            }
        };
        let (state, manifest) = match decode_migout_payload(&payload) {
            Ok(v) => v,
            Err(e) => {
                let err = Self::protocol(&source.node_id, e);
                self.fault(rec);
                return Err(err);
            }
        };
        let mut ticket = MigrationTicket {
            vs: rec.global.clone(),
            source: source.clone(),
            target: None,
            serialized_state: payload,
            phase: MigrationPhase::Extracted,
        };

        let install = Command::MigIn {
            slot: None,
            manifest: manifest.clone(),
            state: state.to_bytes(),
        };
        let new_slot = match self.exchange(target, &install) {
            Ok((slot, _)) => slot,
            Err(e) => {
                ticket.phase = MigrationPhase::Aborted;
                self.last_ticket = Some(ticket);
                self.restore_source(rec, saved, &source, state, manifest)?;
                return Err(match e {
                    ManagerError::NodeCapacity(n) => ManagerError::TargetCapacity(n),
                    ManagerError::NodeEnergy(n) => ManagerError::TargetEnergy(n),
                    e => e,
                });
            }
        };
        let new_local = LocalAddress::new(target, new_slot);
        ticket.target = Some(new_local.clone());
        ticket.phase = MigrationPhase::Installed;

        if let Err(e) = self.map.rebind_atomic(&rec.global, new_local.clone()) {
            let err = Self::protocol(target, e);
            self.fault(rec);
            return Err(err);
        }
        rec.local = Some(new_local.clone());
        rec.apply(LifecycleEvent::MigrateOk, self.now())?;

        if let Err(e) = self.exchange(&source.node_id, &Command::Delete(source.slot)) {
            log::warn!("migrated {} but could not free {source}: {e}", rec.global);
        }
        ticket.phase = MigrationPhase::Committed;
        self.last_ticket = Some(ticket);
        Ok(new_local)
    }

    fn restore_source(
        &mut self,
        rec: &mut VirtualSensorRecord,
        saved: VirtualSensorRecord,
        source: &LocalAddress,
        state: MigrationState,
        manifest: Vec<u8>,
    ) -> Result<(), ManagerError> {
        let thaw = Command::MigIn {
            slot: Some(source.slot),
            manifest,
            state: state.to_bytes(),
        };
        match self.exchange(&source.node_id, &thaw) {
            Ok(_) => {
                *rec = saved;
                Ok(())
            }
            Err(e) => {
                self.fault(rec);
                Err(e)
            }
        }
    }
}
