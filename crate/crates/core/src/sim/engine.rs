//! Single-threaded discrete-event core.
//!
//! Every state change happens while firing a queued event. Events fire in
//! `(deadline, node_id, slot)` order; node-level events (slot `None`) sort
//! before slot events at the same instant and the insertion counter breaks
//! any remaining tie.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use super::clock::VirtualClock;
use super::config::{to_uj, ConfigError, NodeConfig, SimProfile};
use super::node::{Inbound, NodeRuntime, SlotPhase, SlotState};
use super::signal::{keyed_gaussian, sample_value};
use crate::model::{convert_unit, Platform, TaskManifest};
use crate::wire::{
    codec_for, encode_migout_payload, unwrap_relay, wrap_relay, Command, DataFrame, ErrCode,
    MigrationState, Reply, WireError,
};

/// Seed salt separating latency jitter from signal noise.
const JITTER_SALT: u64 = 0x6a69_7474_6572;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("node id {0:?} already in use")]
    DuplicateNodeId(String),
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {0:?} is only reachable through its GTO parent")]
    NotDirectlyReachable(String),
    #[error("node {0:?} cannot relay to {1:?}")]
    NotRelayParent(String, String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Reply,
    Data,
}

/// Bytes leaving the infrastructure towards the IaaS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    /// Node whose radio link carries the bytes (the GTO for relayed frames).
    pub radio: String,
    pub relay: bool,
    pub kind: OutputKind,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Asleep,
    Energy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A sample was taken; `seq` is set when it produced a data message.
    Sampled {
        seq: Option<u32>,
        value: f64,
    },
    SampleSkipped(SkipReason),
    Wake,
    Sleep,
    CommandQueued,
    CommandExecuted(&'static str),
    CommandRejected(ErrCode),
    Output(Output),
    EnergyDepleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub at_ms: u64,
    pub node_id: String,
    pub slot: Option<u8>,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Garble the next `n` frames delivered to the node.
    CorruptInbound(u32),
    /// Reject the next `n` MIGIN installs with a capacity error.
    RejectMigIn(u32),
    /// Reject the next `n` START commands with an energy error, as if the
    /// sensor browned out while powering up.
    StartBrownout(u32),
}

#[derive(Debug)]
enum Effect {
    None,
    DeployDone(u8),
    Activate { slot: u8, gen: u64 },
}

#[derive(Debug)]
enum Action {
    Arrive(Vec<u8>),
    Sample { slot: u8, gen: u64 },
    Edge { awake: bool },
    Complete { reply: Reply, effect: Effect },
}

#[derive(Debug)]
struct Queued {
    deadline: u64,
    node_id: String,
    slot: Option<u8>,
    order: u64,
    action: Action,
}

impl Queued {
    fn key(&self) -> (u64, &str, Option<u8>, u64) {
        (self.deadline, &self.node_id, self.slot, self.order)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

pub struct Sim {
    profile: SimProfile,
    e_sample_uj: u64,
    e_cmd_uj: u64,
    clock: VirtualClock,
    now: u64,
    nodes: BTreeMap<String, NodeRuntime>,
    queue: BinaryHeap<Reverse<Queued>>,
    order: u64,
    jitter_draws: u64,
    dirty: BTreeSet<String>,
}

impl Sim {
    pub fn new(profile: SimProfile) -> Self {
        Sim {
            e_sample_uj: to_uj(profile.energy.sample_j),
            e_cmd_uj: to_uj(profile.energy.command_j),
            profile,
            clock: VirtualClock::new(),
            now: 0,
            nodes: BTreeMap::new(),
            queue: BinaryHeap::new(),
            order: 0,
            jitter_draws: 0,
            dirty: BTreeSet::new(),
        }
    }

    pub fn profile(&self) -> &SimProfile {
        &self.profile
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn clock(&self) -> VirtualClock {
        self.clock.clone()
    }

    pub fn node(&self, id: &str) -> Option<&NodeRuntime> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRuntime> {
        self.nodes.values()
    }

    pub fn e_sample_uj(&self) -> u64 {
        self.e_sample_uj
    }

    pub fn e_cmd_uj(&self) -> u64 {
        self.e_cmd_uj
    }

    /// Node ids whose load, battery or wake state changed since the last call.
    pub fn take_dirty(&mut self) -> BTreeSet<String> {
        std::mem::take(&mut self.dirty)
    }

    pub fn spawn_node(&mut self, config: NodeConfig) -> Result<String, SimError> {
        config.validate()?;
        if self.nodes.contains_key(&config.node_id) {
            return Err(SimError::DuplicateNodeId(config.node_id));
        }
        if let Some(parent) = &config.gto_parent {
            match self.nodes.get(parent) {
                Some(p) if p.config().platform == Platform::Spotsim => {}
                _ => {
                    return Err(ConfigError::InvalidConfig {
                        node: config.node_id.clone(),
                        reason: format!("GTO parent {parent:?} is not a spawned spotsim node"),
                    }
                    .into())
                }
            }
        }
        let id = config.node_id.clone();
        if let Some((at, awake)) = config.duty_cycle.and_then(|d| d.next_edge(self.now)) {
            self.push(at, &id, None, Action::Edge { awake });
        }
        self.nodes
            .insert(id.clone(), NodeRuntime::new(config, &self.profile.energy));
        self.dirty.insert(id.clone());
        Ok(id)
    }

    pub fn inject_fault(&mut self, node_id: &str, fault: Fault) -> Result<(), SimError> {
        let node = self
            .nodes
            .get_mut(node_id)
            .ok_or_else(|| SimError::UnknownNode(node_id.to_string()))?;
        match fault {
            Fault::CorruptInbound(n) => node.faults.corrupt_inbound += n,
            Fault::RejectMigIn(n) => node.faults.reject_migin += n,
            Fault::StartBrownout(n) => node.faults.start_brownout += n,
        }
        Ok(())
    }

    /// Hands a frame to `radio`'s link. With `relay`, `radio` is a GTO and the
    /// frame carries the relay envelope naming the constrained target.
    /// The frame is processed when the clock next runs.
    pub fn deliver(&mut self, radio: &str, frame: Vec<u8>, relay: bool) -> Result<(), SimError> {
        let node = self
            .nodes
            .get(radio)
            .ok_or_else(|| SimError::UnknownNode(radio.to_string()))?;
        if relay {
            let (target, inner) = unwrap_relay(&frame)?;
            match self.nodes.get(&target) {
                Some(t) if t.config().gto_parent.as_deref() == Some(radio) => {}
                Some(_) => return Err(SimError::NotRelayParent(radio.to_string(), target)),
                None => return Err(SimError::UnknownNode(target)),
            }
            let inner = inner.to_vec();
            self.push(self.now, &target, None, Action::Arrive(inner));
        } else {
            if node.config().platform == Platform::Motesim {
                return Err(SimError::NotDirectlyReachable(radio.to_string()));
            }
            self.push(self.now, radio, None, Action::Arrive(frame));
        }
        Ok(())
    }

    pub fn next_event_time(&self) -> Option<u64> {
        self.queue.peek().map(|Reverse(q)| q.deadline)
    }

    /// Fires the earliest pending event if its deadline is `<= limit`.
    pub fn fire_next(&mut self, limit: u64) -> Option<Vec<SimEvent>> {
        if self.next_event_time()? > limit {
            return None;
        }
        let Reverse(q) = self.queue.pop().unwrap();
        self.set_now(q.deadline);
        let mut out = Vec::new();
        self.fire(q, &mut out);
        Some(out)
    }

    /// Fires everything due up to `now + dt_ms` and moves the clock there.
    pub fn advance_clock(&mut self, dt_ms: u64) -> Vec<SimEvent> {
        self.advance_to(self.now + dt_ms)
    }

    pub fn advance_to(&mut self, target: u64) -> Vec<SimEvent> {
        let mut out = Vec::new();
        while let Some(evs) = self.fire_next(target) {
            out.extend(evs);
        }
        if target > self.now {
            self.set_now(target);
        }
        out
    }

    fn set_now(&mut self, t: u64) {
        self.now = t;
        self.clock.set(t);
    }

    fn push(&mut self, deadline: u64, node_id: &str, slot: Option<u8>, action: Action) {
        self.order += 1;
        self.queue.push(Reverse(Queued {
            deadline,
            node_id: node_id.to_string(),
            slot,
            order: self.order,
            action,
        }));
    }

    fn jittered(&mut self, base_ms: u64) -> u64 {
        let sigma = self.profile.jitter_sigma_ms;
        if sigma <= 0.0 {
            return base_ms;
        }
        let z = keyed_gaussian(self.profile.seed ^ JITTER_SALT, self.jitter_draws).clamp(-2.5, 2.5);
        self.jitter_draws += 1;
        (base_ms as f64 + z * sigma).round().max(0.0) as u64
    }

    fn fire(&mut self, q: Queued, out: &mut Vec<SimEvent>) {
        let Queued {
            node_id,
            slot,
            action,
            ..
        } = q;
        match action {
            Action::Arrive(frame) => self.arrive(&node_id, frame, out),
            Action::Sample { slot, gen } => self.sample(&node_id, slot, gen, out),
            Action::Edge { awake } => self.edge(&node_id, awake, out),
            Action::Complete { reply, effect } => self.complete(&node_id, slot, reply, effect, out),
        }
    }

    fn event(&self, node_id: &str, slot: Option<u8>, kind: EventKind) -> SimEvent {
        SimEvent {
            at_ms: self.now,
            node_id: node_id.to_string(),
            slot,
            kind,
        }
    }

    fn edge(&mut self, id: &str, awake: bool, out: &mut Vec<SimEvent>) {
        let node = self.nodes.get(id).unwrap();
        let duty = node
            .config()
            .duty_cycle
            .expect("edges only exist with a duty cycle");
        out.push(self.event(
            id,
            None,
            if awake {
                EventKind::Wake
            } else {
                EventKind::Sleep
            },
        ));
        if let Some((at, next)) = duty.next_edge(self.now) {
            self.push(at, id, None, Action::Edge { awake: next });
        }
        self.dirty.insert(id.to_string());
        if awake {
            let pending: Vec<Inbound> = self.nodes.get_mut(id).unwrap().queue.drain(..).collect();
            for inbound in pending {
                self.execute(id, inbound.frame, out);
            }
        }
    }

    fn arrive(&mut self, id: &str, frame: Vec<u8>, out: &mut Vec<SimEvent>) {
        let depth = self.profile.queue_depth;
        let node = self.nodes.get_mut(id).unwrap();
        if node.config().is_awake(self.now) {
            self.execute(id, frame, out);
        } else if node.queue.len() >= depth {
            out.push(self.event(id, None, EventKind::CommandRejected(ErrCode::QueueFull)));
            self.reply_at(
                id,
                None,
                0,
                Reply::err(ErrCode::QueueFull, "command queue full"),
                Effect::None,
            );
        } else {
            node.queue.push_back(Inbound { frame });
            out.push(self.event(id, None, EventKind::CommandQueued));
        }
    }

    fn reply_at(&mut self, id: &str, slot: Option<u8>, delay: u64, reply: Reply, effect: Effect) {
        self.push(
            self.now + delay,
            id,
            slot,
            Action::Complete { reply, effect },
        );
    }

    fn reject(
        &mut self,
        id: &str,
        slot: Option<u8>,
        code: ErrCode,
        text: &str,
        out: &mut Vec<SimEvent>,
    ) {
        out.push(self.event(id, slot, EventKind::CommandRejected(code)));
        self.reply_at(id, slot, 0, Reply::err(code, text), Effect::None);
    }

    fn execute(&mut self, id: &str, mut frame: Vec<u8>, out: &mut Vec<SimEvent>) {
        let e_cmd = self.e_cmd_uj;
        let node = self.nodes.get_mut(id).unwrap();
        let platform = node.config().platform;
        if node.faults.corrupt_inbound > 0 {
            node.faults.corrupt_inbound -= 1;
            frame = vec![0xFF; 2];
        }
        let cmd = match codec_for(platform).decode_command(&frame) {
            Ok(c) => c,
            Err(WireError::Unsupported(what)) => {
                return self.reject(id, None, ErrCode::Unsupported, what, out);
            }
            Err(e) => return self.reject(id, None, ErrCode::BadFrame, &e.to_string(), out),
        };
        if !node.can_spend(e_cmd) {
            return self.reject(id, None, ErrCode::Energy, "battery below reserve", out);
        }
        let crossed = node.spend(e_cmd);
        node.commands_executed += 1;
        self.dirty.insert(id.to_string());
        out.push(self.event(id, None, EventKind::CommandExecuted(cmd.name())));
        if crossed {
            out.push(self.event(id, None, EventKind::EnergyDepleted));
        }
        self.run_command(id, platform, cmd, out);
    }

    /// Validates a manifest against the node; returns the capability index.
    fn admit_manifest(
        &self,
        id: &str,
        bytes: &[u8],
    ) -> Result<(TaskManifest, usize), (ErrCode, String)> {
        let node = &self.nodes[id];
        let m = TaskManifest::from_bytes(bytes).map_err(|e| (ErrCode::BadFrame, e.to_string()))?;
        if m.platform != node.config().platform {
            return Err((
                ErrCode::Unsupported,
                format!("manifest targets {}", m.platform),
            ));
        }
        let idx = node
            .config()
            .capabilities
            .iter()
            .position(|c| c.capability == m.capability)
            .ok_or((ErrCode::Unsupported, format!("no {} sensor", m.capability)))?;
        let decl = &node.config().capabilities[idx];
        if !decl.units.contains(&m.unit) {
            return Err((
                ErrCode::Unsupported,
                format!("unit {} not supported", m.unit),
            ));
        }
        if !decl.sampling_interval_ms.contains(m.sampling_interval_ms) {
            return Err((
                ErrCode::Unsupported,
                "sampling interval out of range".into(),
            ));
        }
        Ok((m, idx))
    }

    fn pick_slot(&self, id: &str, requested: Option<u8>) -> Result<u8, (ErrCode, &'static str)> {
        let node = &self.nodes[id];
        match requested {
            Some(s) if s >= node.capacity() => Err((ErrCode::NoSlot, "no such slot")),
            Some(s) if node.slot(s).is_some() => Err((ErrCode::Capacity, "slot occupied")),
            Some(s) => Ok(s),
            None => node.first_free().ok_or((ErrCode::Capacity, "no free slot")),
        }
    }

    fn next_gen(&mut self) -> u64 {
        self.order += 1;
        self.order
    }

    fn run_command(&mut self, id: &str, platform: Platform, cmd: Command, out: &mut Vec<SimEvent>) {
        let delays = *self.profile.delays(platform);
        match cmd {
            Command::Deploy { slot, manifest } => {
                let (m, cap_index) = match self.admit_manifest(id, &manifest) {
                    Ok(v) => v,
                    Err((code, text)) => return self.reject(id, slot, code, &text, out),
                };
                let s = match self.pick_slot(id, slot) {
                    Ok(s) => s,
                    Err((code, text)) => return self.reject(id, slot, code, text, out),
                };
                let delay = self.jittered(delays.deploy_ms(m.size_kb()));
                let gen = self.next_gen();
                self.nodes.get_mut(id).unwrap().slots[s as usize] = Some(SlotState {
                    manifest: m,
                    manifest_bytes: manifest,
                    phase: SlotPhase::Deploying,
                    next_seq: 1,
                    rule_active: false,
                    gen,
                    cap_index,
                });
                self.reply_at(id, Some(s), delay, Reply::ok(s), Effect::DeployDone(s));
            }
            Command::Start(s) => {
                let node = self.nodes.get_mut(id).unwrap();
                if node.faults.start_brownout > 0 {
                    node.faults.start_brownout -= 1;
                    return self.reject(id, Some(s), ErrCode::Energy, "injected brownout", out);
                }
                let phase = self.nodes[id].slot(s).map(|st| st.phase);
                match phase {
                    Some(SlotPhase::Idle) => {
                        let gen = self.next_gen();
                        self.slot_mut(id, s).gen = gen;
                        let delay = self.jittered(delays.start_sync_ms);
                        self.reply_at(
                            id,
                            Some(s),
                            delay,
                            Reply::ok(s),
                            Effect::Activate { slot: s, gen },
                        );
                    }
                    Some(SlotPhase::Running) => {
                        self.reply_at(id, Some(s), delays.command_ms, Reply::ok(s), Effect::None)
                    }
                    _ => self.reject(id, Some(s), ErrCode::NoSlot, "slot not startable", out),
                }
            }
            Command::Stop(s) => {
                let phase = self.nodes[id].slot(s).map(|st| st.phase);
                match phase {
                    Some(SlotPhase::Idle | SlotPhase::Running) => {
                        let gen = self.next_gen();
                        let st = self.slot_mut(id, s);
                        st.phase = SlotPhase::Idle;
                        st.gen = gen;
                        self.reply_at(id, Some(s), delays.command_ms, Reply::ok(s), Effect::None);
                    }
                    _ => self.reject(id, Some(s), ErrCode::NoSlot, "slot not stoppable", out),
                }
            }
            Command::Delete(s) => {
                let phase = self.nodes[id].slot(s).map(|st| st.phase);
                match phase {
                    Some(SlotPhase::Deploying) | None => {
                        self.reject(id, Some(s), ErrCode::NoSlot, "slot not deletable", out)
                    }
                    Some(_) => {
                        self.nodes.get_mut(id).unwrap().slots[s as usize] = None;
                        self.reply_at(id, Some(s), delays.command_ms, Reply::ok(s), Effect::None);
                    }
                }
            }
            Command::State(s) => match self.nodes[id].slot(s).map(|st| st.report()) {
                Some(r) => self.reply_at(
                    id,
                    Some(s),
                    delays.command_ms,
                    Reply::Ok {
                        slot: s,
                        payload: r.to_bytes(),
                    },
                    Effect::None,
                ),
                None => self.reject(id, Some(s), ErrCode::NoSlot, "empty slot", out),
            },
            Command::MigOut(s) => {
                let phase = self.nodes[id].slot(s).map(|st| st.phase);
                let was_running = match phase {
                    Some(SlotPhase::Idle) => false,
                    Some(SlotPhase::Running) => true,
                    _ => {
                        return self.reject(
                            id,
                            Some(s),
                            ErrCode::NoSlot,
                            "slot not migratable",
                            out,
                        )
                    }
                };
                let gen = self.next_gen();
                let st = self.slot_mut(id, s);
                st.phase = SlotPhase::Frozen { was_running };
                st.gen = gen;
                let payload = encode_migout_payload(
                    MigrationState {
                        running: was_running,
                        next_seq: st.next_seq,
                    },
                    &st.manifest_bytes,
                );
                self.reply_at(
                    id,
                    Some(s),
                    delays.command_ms,
                    Reply::Ok { slot: s, payload },
                    Effect::None,
                );
            }
            Command::MigIn {
                slot,
                manifest,
                state,
            } => {
                let state = match MigrationState::from_bytes(&state) {
                    Ok(st) => st,
                    Err(e) => return self.reject(id, slot, ErrCode::BadFrame, &e.to_string(), out),
                };
                let (m, cap_index) = match self.admit_manifest(id, &manifest) {
                    Ok(v) => v,
                    Err((code, text)) => return self.reject(id, slot, code, &text, out),
                };
                let frozen = slot.filter(|s| {
                    matches!(
                        self.nodes[id].slot(*s).map(|st| st.phase),
                        Some(SlotPhase::Frozen { .. })
                    )
                });
                let s = match frozen {
                    Some(s) => s,
                    None => {
                        let node = self.nodes.get_mut(id).unwrap();
                        if node.faults.reject_migin > 0 {
                            node.faults.reject_migin -= 1;
                            return self.reject(
                                id,
                                slot,
                                ErrCode::Capacity,
                                "injected install failure",
                                out,
                            );
                        }
                        match self.pick_slot(id, slot) {
                            Ok(s) => s,
                            Err((code, text)) => return self.reject(id, slot, code, text, out),
                        }
                    }
                };
                let gen = self.next_gen();
                self.nodes.get_mut(id).unwrap().slots[s as usize] = Some(SlotState {
                    manifest: m,
                    manifest_bytes: manifest,
                    phase: SlotPhase::Idle,
                    next_seq: state.next_seq,
                    rule_active: false,
                    gen,
                    cap_index,
                });
                let effect = if state.running {
                    Effect::Activate { slot: s, gen }
                } else {
                    Effect::None
                };
                self.reply_at(id, Some(s), delays.command_ms, Reply::ok(s), effect);
            }
        }
    }

    fn slot_mut(&mut self, id: &str, s: u8) -> &mut SlotState {
        self.nodes.get_mut(id).unwrap().slots[s as usize]
            .as_mut()
            .expect("slot checked by caller")
    }

    fn complete(
        &mut self,
        id: &str,
        slot: Option<u8>,
        reply: Reply,
        effect: Effect,
        out: &mut Vec<SimEvent>,
    ) {
        match effect {
            Effect::None => {}
            Effect::DeployDone(s) => {
                if let Some(st) = self.nodes.get_mut(id).unwrap().slots[s as usize].as_mut() {
                    if st.phase == SlotPhase::Deploying {
                        st.phase = SlotPhase::Idle;
                    }
                }
            }
            Effect::Activate { slot: s, gen } => {
                let now = self.now;
                let mut first = None;
                if let Some(st) = self.nodes.get_mut(id).unwrap().slots[s as usize].as_mut() {
                    if st.gen == gen && st.phase == SlotPhase::Idle {
                        st.phase = SlotPhase::Running;
                        first = Some(now + st.manifest.sampling_interval_ms);
                    }
                }
                if let Some(at) = first {
                    self.push(at, id, Some(s), Action::Sample { slot: s, gen });
                }
            }
        }
        self.dirty.insert(id.to_string());
        let output = self.output(id, OutputKind::Reply, &reply);
        out.push(self.event(id, slot, EventKind::Output(output)));
    }

    fn output(&self, id: &str, kind: OutputKind, reply: &Reply) -> Output {
        let node = &self.nodes[id];
        let codec = codec_for(node.config().platform);
        let bytes = codec.encode_reply(reply);
        self.route(node, kind, bytes)
    }

    fn route(&self, node: &NodeRuntime, kind: OutputKind, bytes: Vec<u8>) -> Output {
        match &node.config().gto_parent {
            Some(parent) => Output {
                radio: parent.clone(),
                relay: true,
                kind,
                bytes: wrap_relay(node.id(), &bytes).expect("node ids fit the relay prefix"),
            },
            None => Output {
                radio: node.id().to_string(),
                relay: false,
                kind,
                bytes,
            },
        }
    }

    fn sample(&mut self, id: &str, s: u8, gen: u64, out: &mut Vec<SimEvent>) {
        let now = self.now;
        let e_sample = self.e_sample_uj;
        let node = self.nodes.get_mut(id).unwrap();
        let awake = node.config().is_awake(now);
        let Some(st) = node.slots[s as usize].as_ref() else {
            return;
        };
        if st.gen != gen || st.phase != SlotPhase::Running {
            return;
        }
        let interval = st.manifest.sampling_interval_ms;
        if !awake {
            out.push(self.event(id, Some(s), EventKind::SampleSkipped(SkipReason::Asleep)));
            self.push(now + interval, id, Some(s), Action::Sample { slot: s, gen });
            return;
        }
        if !node.can_spend(e_sample) {
            out.push(self.event(id, Some(s), EventKind::SampleSkipped(SkipReason::Energy)));
            self.push(now + interval, id, Some(s), Action::Sample { slot: s, gen });
            return;
        }
        let crossed = node.spend(e_sample);
        node.samples_taken += 1;
        let platform = node.config().platform;
        let st = node.slots[s as usize].as_ref().unwrap();
        let decl = &node.config().capabilities[st.cap_index];
        let raw = sample_value(decl, now);
        let value = convert_unit(raw, decl.native_unit(), st.manifest.unit)
            .expect("manifest unit admitted against the capability family");
        let unit = st.manifest.unit;
        let rule = st.manifest.rule;
        let st = node.slots[s as usize].as_mut().unwrap();
        let emit = match rule {
            None => true,
            Some(r) => {
                let holds = r.comparator.holds(value, r.threshold);
                let rising = holds && !st.rule_active;
                st.rule_active = holds;
                rising
            }
        };
        let seq = emit.then(|| {
            let seq = st.next_seq;
            st.next_seq += 1;
            seq
        });
        self.dirty.insert(id.to_string());
        out.push(self.event(id, Some(s), EventKind::Sampled { seq, value }));
        if let Some(seq) = seq {
            let frame = DataFrame {
                slot: s,
                seq,
                ts_ms: now,
                value,
                unit,
            };
            let node = &self.nodes[id];
            let bytes = codec_for(platform).encode_data(&frame);
            let output = self.route(node, OutputKind::Data, bytes);
            out.push(self.event(id, Some(s), EventKind::Output(output)));
        }
        if crossed {
            out.push(self.event(id, None, EventKind::EnergyDepleted));
        }
        self.push(now + interval, id, Some(s), Action::Sample { slot: s, gen });
    }
}
