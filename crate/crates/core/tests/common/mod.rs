#![allow(dead_code)]

use vwsn_core::model::{Capability, GeoPoint, Platform, TaskManifest, ThresholdRule, Unit};
use vwsn_core::sim::{
    CapabilityDecl, DutyCycle, EventKind, IntervalRange, NodeConfig, OutputKind, SignalParams, Sim,
    SimEvent,
};
use vwsn_core::wire::{codec_for, unwrap_relay, Command, DataFrame, Reply};

pub fn signal(
    base: f64,
    amplitude: f64,
    period_ms: u64,
    noise_sigma: f64,
    seed: u64,
) -> SignalParams {
    SignalParams {
        base,
        amplitude,
        period_ms,
        noise_sigma,
        seed,
    }
}

pub fn temperature(sig: SignalParams) -> CapabilityDecl {
    CapabilityDecl {
        capability: Capability::Temperature,
        units: vec![Unit::Celsius, Unit::Kelvin],
        sampling_interval_ms: IntervalRange {
            min: 100,
            max: 60_000,
        },
        signal: sig,
    }
}

pub fn light(sig: SignalParams) -> CapabilityDecl {
    CapabilityDecl {
        capability: Capability::Light,
        units: vec![Unit::Lux],
        sampling_interval_ms: IntervalRange {
            min: 500,
            max: 60_000,
        },
        signal: sig,
    }
}

pub fn spot(id: &str, caps: Vec<CapabilityDecl>) -> NodeConfig {
    NodeConfig {
        node_id: id.into(),
        platform: Platform::Spotsim,
        gto_parent: None,
        capabilities: caps,
        location: GeoPoint::new(45.5, -73.6).unwrap(),
        battery_j: 1_000.0,
        duty_cycle: None,
        capacity: None,
    }
}

pub fn mote(id: &str, parent: &str, caps: Vec<CapabilityDecl>) -> NodeConfig {
    NodeConfig {
        platform: Platform::Motesim,
        gto_parent: Some(parent.into()),
        ..spot(id, caps)
    }
}

pub fn with_duty(mut n: NodeConfig, period_ms: u64, awake_ms: u64) -> NodeConfig {
    n.duty_cycle = Some(DutyCycle {
        period_ms,
        awake_ms,
    });
    n
}

pub fn manifest(id: u128, platform: Platform, interval: u64) -> TaskManifest {
    TaskManifest {
        vs_id: uuid::Uuid::from_u128(id),
        platform,
        capability: Capability::Temperature,
        sampling_interval_ms: interval,
        unit: Unit::Celsius,
        endpoint: "127.0.0.1:9000".into(),
        rule: None,
    }
}

pub fn with_rule(mut m: TaskManifest, rule: ThresholdRule) -> TaskManifest {
    m.rule = Some(rule);
    m
}

/// Sends `cmd` to `node` (through its parent for motes) and steps the sim
/// until its reply comes back. Returns the reply and every event fired.
pub fn exchange(sim: &mut Sim, node: &str, cmd: &Command) -> (Reply, Vec<SimEvent>) {
    let platform = sim.node(node).expect("node exists").config().platform;
    let frame = codec_for(platform).encode_command(cmd).expect("encodable");
    exchange_raw(sim, node, frame)
}

/// Like [`exchange`] but with an already encoded frame.
pub fn exchange_raw(sim: &mut Sim, node: &str, frame: Vec<u8>) -> (Reply, Vec<SimEvent>) {
    let cfg = sim.node(node).expect("node exists").config().clone();
    let codec = codec_for(cfg.platform);
    match &cfg.gto_parent {
        Some(p) => sim
            .deliver(p, vwsn_core::wire::wrap_relay(node, &frame).unwrap(), true)
            .unwrap(),
        None => sim.deliver(node, frame, false).unwrap(),
    }
    let mut all = Vec::new();
    loop {
        let evs = sim.fire_next(u64::MAX).expect("reply arrives");
        let mut reply = None;
        for ev in evs {
            if let Some(bytes) = reply_bytes(&ev) {
                if ev.node_id == node {
                    reply = Some(codec.decode_reply(&bytes).unwrap());
                }
            }
            all.push(ev);
        }
        if let Some(r) = reply {
            return (r, all);
        }
    }
}

pub fn reply_bytes(ev: &SimEvent) -> Option<Vec<u8>> {
    match &ev.kind {
        EventKind::Output(o) if o.kind == OutputKind::Reply => Some(if o.relay {
            unwrap_relay(&o.bytes).unwrap().1.to_vec()
        } else {
            o.bytes.clone()
        }),
        _ => None,
    }
}

/// Decoded data frames among `events`, with the emitting node id.
pub fn data_frames(sim: &Sim, events: &[SimEvent]) -> Vec<(String, DataFrame)> {
    events
        .iter()
        .filter_map(|ev| match &ev.kind {
            EventKind::Output(o) if o.kind == OutputKind::Data => {
                let inner = if o.relay {
                    unwrap_relay(&o.bytes).unwrap().1.to_vec()
                } else {
                    o.bytes.clone()
                };
                let p = sim.node(&ev.node_id).unwrap().config().platform;
                Some((
                    ev.node_id.clone(),
                    codec_for(p).decode_data(&inner).unwrap(),
                ))
            }
            _ => None,
        })
        .collect()
}

pub fn deploy(m: &TaskManifest) -> Command {
    Command::Deploy {
        slot: None,
        manifest: m.to_bytes(),
    }
}
