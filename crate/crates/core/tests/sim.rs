mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use vwsn_core::model::{Comparator, Platform, ThresholdRule};
use vwsn_core::sim::{
    signal::keyed_gaussian, EventKind, Fault, Sim, SimError, SimEvent, SimProfile, SkipReason,
    SlotPhase, Topology,
};
use vwsn_core::wire::{Command, ErrCode, Reply, SlotReport, SlotStatus};

fn sine_oracle(base: f64, amp: f64, period: u64, t: u64) -> f64 {
    // independent closed form, computed in radians over the full time value
    let w = 2.0 * std::f64::consts::PI / period as f64;
    base + amp * (w * t as f64).sin()
}

#[test]
fn empty_node_and_invalid_configs() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    assert_eq!(sim.node("a").unwrap().occupied(), 0);
    assert!(matches!(
        sim.spawn_node(spot(
            "a",
            vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]
        )),
        Err(SimError::DuplicateNodeId(_))
    ));
    let mut orphan = mote("m", "a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]);
    orphan.gto_parent = None;
    assert!(matches!(
        sim.spawn_node(orphan),
        Err(SimError::InvalidConfig(_))
    ));
    let missing_parent = mote(
        "m",
        "nope",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    );
    assert!(matches!(
        sim.spawn_node(missing_parent),
        Err(SimError::InvalidConfig(_))
    ));
}

#[test]
fn hundred_nodes_from_topology_file() {
    let mut text = String::new();
    for i in 0..100 {
        text.push_str(&format!(
            "[[node]]\nid = \"n{i:03}\"\nplatform = \"spotsim\"\nbattery_j = 50.0\nlocation = {{ lat = 45.0, lon = {} }}\n\
             [[node.capability]]\ncapability = \"temperature\"\nunits = [\"celsius\"]\n\
             sampling_interval_ms = {{ min = 100, max = 1000 }}\nsignal = {{ base = 20.0, amplitude = 1.0, period_ms = 1000 }}\n\n",
            -73.0 + i as f64 * 0.001
        ));
    }
    let topo = Topology::from_toml(&text).unwrap();
    let mut sim = Sim::new(SimProfile::instant());
    for n in topo.spawn_order() {
        sim.spawn_node(n.clone()).unwrap();
    }
    assert_eq!(sim.nodes().count(), 100);
}

#[test]
fn deploy_first_slot_and_mote_capacity() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "gto",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    sim.spawn_node(mote(
        "m1",
        "gto",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    let (r, _) = exchange(
        &mut sim,
        "gto",
        &deploy(&manifest(1, Platform::Spotsim, 1000)),
    );
    assert_eq!(r, Reply::ok(0));
    let (r, _) = exchange(
        &mut sim,
        "m1",
        &deploy(&manifest(2, Platform::Motesim, 1000)),
    );
    assert_eq!(r, Reply::ok(0));
    let (r, _) = exchange(
        &mut sim,
        "m1",
        &deploy(&manifest(3, Platform::Motesim, 1000)),
    );
    assert!(matches!(
        r,
        Reply::Err {
            code: ErrCode::Capacity,
            ..
        }
    ));
}

#[test]
fn mote_is_not_directly_reachable() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "gto",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    sim.spawn_node(mote(
        "m1",
        "gto",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    assert_eq!(
        sim.deliver("m1", vec![0x02, 0, 1, 0], false),
        Err(SimError::NotDirectlyReachable("m1".into()))
    );
    let (r, _) = exchange_raw(&mut sim, "m1", vec![0x06, 0, 1, 0]);
    assert!(matches!(
        r,
        Reply::Err {
            code: ErrCode::Unsupported,
            ..
        }
    ));
}

#[test]
fn delays_follow_the_platform_model() {
    let mut sim = Sim::new(SimProfile::default());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    let m = manifest(1, Platform::Spotsim, 1000);
    assert_eq!(m.size_kb(), 1);
    let t0 = sim.now();
    let (r, _) = exchange(&mut sim, "a", &deploy(&m));
    assert_eq!(r, Reply::ok(0));
    assert_eq!(sim.now() - t0, 14_973);
    assert_eq!(
        sim.node("a").unwrap().slot(0).unwrap().phase,
        SlotPhase::Idle
    );
    let t1 = sim.now();
    exchange(&mut sim, "a", &Command::Start(0));
    assert_eq!(sim.now() - t1, 4_200);
    assert_eq!(
        sim.node("a").unwrap().slot(0).unwrap().phase,
        SlotPhase::Running
    );
}

#[test]
fn ten_seconds_ten_samples() {
    let (base, amp, period) = (21.0, 3.0, 7_000);
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(base, amp, period, 0.0, 9))],
    ))
    .unwrap();
    exchange(
        &mut sim,
        "a",
        &deploy(&manifest(1, Platform::Spotsim, 1000)),
    );
    let (_, _) = exchange(&mut sim, "a", &Command::Start(0));
    let t0 = sim.now();
    let evs = sim.advance_clock(10_000);
    let frames = data_frames(&sim, &evs);
    assert_eq!(frames.len(), 10);
    for (i, (_, f)) in frames.iter().enumerate() {
        assert_eq!(f.seq, i as u32 + 1);
        assert_eq!(f.ts_ms, t0 + 1000 * (i as u64 + 1));
        let want = sine_oracle(base, amp, period, f.ts_ms);
        assert!((f.value - want).abs() < 1e-9, "{} vs {want}", f.value);
    }
}

#[test]
fn noisy_signal_replays_and_stays_bounded() {
    let sigma = 0.5;
    let run = || {
        let mut sim = Sim::new(SimProfile::instant());
        sim.spawn_node(spot(
            "a",
            vec![temperature(signal(20.0, 2.0, 5_000, sigma, 77))],
        ))
        .unwrap();
        exchange(&mut sim, "a", &deploy(&manifest(1, Platform::Spotsim, 100)));
        exchange(&mut sim, "a", &Command::Start(0));
        let evs = sim.advance_clock(100_000);
        data_frames(&sim, &evs)
            .into_iter()
            .map(|(_, f)| (f.ts_ms, f.value.to_bits()))
            .collect::<Vec<_>>()
    };
    let a = run();
    assert_eq!(a.len(), 1000);
    assert_eq!(a, run());
    for (t, bits) in a {
        let v = f64::from_bits(bits);
        let clean = sine_oracle(20.0, 2.0, 5_000, t);
        assert!((v - clean - sigma * keyed_gaussian(77, t)).abs() < 1e-9);
        assert!((v - clean).abs() < 6.0 * sigma);
    }
}

#[test]
fn node_events_sort_by_id_at_equal_deadline() {
    let mut sim = Sim::new(SimProfile::instant());
    for id in ["b", "a"] {
        sim.spawn_node(spot(id, vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]))
            .unwrap();
        exchange(&mut sim, id, &deploy(&manifest(1, Platform::Spotsim, 1000)));
    }
    // start both at the same instant so their samples coincide
    for id in ["b", "a"] {
        let f = vwsn_core::wire::codec_for(Platform::Spotsim)
            .encode_command(&Command::Start(0))
            .unwrap();
        sim.deliver(id, f, false).unwrap();
    }
    assert!(sim
        .advance_clock(0)
        .iter()
        .any(|e| matches!(e.kind, EventKind::Output(_))));
    let evs = sim.advance_clock(3_000);
    let order: Vec<&str> = evs
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Sampled { .. }))
        .map(|e| e.node_id.as_str())
        .collect();
    assert_eq!(order, ["a", "b", "a", "b", "a", "b"]);
    assert!(Sim::new(SimProfile::instant())
        .advance_clock(1000)
        .is_empty());
}

fn trace_of(seed: u64) -> Vec<SimEvent> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Sim::new(SimProfile {
        jitter_sigma_ms: 250.0,
        seed,
        ..SimProfile::default()
    });
    for i in 0..5 {
        let mut n = spot(
            &format!("n{i}"),
            vec![temperature(signal(20.0, 1.0, 3_000, 0.2, i))],
        );
        if i % 2 == 0 {
            n = with_duty(n, 4_000, 1_000 + 500 * i);
        }
        sim.spawn_node(n).unwrap();
    }
    let mut trace = Vec::new();
    for k in 0..1000u32 {
        let node = format!("n{}", rng.random_range(0..5));
        let slot = rng.random_range(0..4u8);
        let cmd = match rng.random_range(0..4) {
            0 => deploy(&manifest(
                k as u128,
                Platform::Spotsim,
                rng.random_range(100..2_000),
            )),
            1 => Command::Start(slot),
            2 => Command::Stop(slot),
            _ => Command::Delete(slot),
        };
        let f = vwsn_core::wire::codec_for(Platform::Spotsim)
            .encode_command(&cmd)
            .unwrap();
        sim.deliver(&node, f, false).unwrap();
        trace.extend(sim.advance_clock(rng.random_range(1..500)));
    }
    trace
}

#[test]
fn thousand_random_events_replay_identically() {
    let a = trace_of(3);
    assert!(a.len() > 1000);
    assert_eq!(a, trace_of(3));
    assert_ne!(a, trace_of(4));
}

#[test]
fn sleeping_node_queues_until_wake() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(with_duty(
        spot("a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
        10_000,
        2_000,
    ))
    .unwrap();
    sim.advance_clock(3_000);
    let f = vwsn_core::wire::codec_for(Platform::Spotsim)
        .encode_command(&deploy(&manifest(1, Platform::Spotsim, 500)))
        .unwrap();
    sim.deliver("a", f, false).unwrap();
    let evs = sim.advance_clock(0);
    assert!(evs.iter().any(|e| e.kind == EventKind::CommandQueued));
    assert_eq!(sim.node("a").unwrap().queued(), 1);
    let evs = sim.advance_clock(10_000);
    let exec = evs
        .iter()
        .find(|e| matches!(e.kind, EventKind::CommandExecuted(_)))
        .unwrap();
    assert_eq!(exec.at_ms, 10_000);
}

#[test]
fn queue_overflow_is_an_error() {
    let mut profile = SimProfile::instant();
    profile.queue_depth = 2;
    let mut sim = Sim::new(profile);
    sim.spawn_node(with_duty(
        spot("a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
        10_000,
        1_000,
    ))
    .unwrap();
    sim.advance_clock(5_000);
    let codec = vwsn_core::wire::codec_for(Platform::Spotsim);
    for _ in 0..3 {
        sim.deliver(
            "a",
            codec.encode_command(&Command::State(0)).unwrap(),
            false,
        )
        .unwrap();
    }
    let evs = sim.advance_clock(0);
    let replies: Vec<Reply> = evs
        .iter()
        .filter_map(reply_bytes)
        .map(|b| codec.decode_reply(&b).unwrap())
        .collect();
    assert_eq!(replies.len(), 1);
    assert!(matches!(
        replies[0],
        Reply::Err {
            code: ErrCode::QueueFull,
            ..
        }
    ));
}

#[test]
fn no_data_while_asleep() {
    let mut sim = Sim::new(SimProfile::instant());
    let duty = (3_000, 1_200);
    sim.spawn_node(with_duty(
        spot("a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
        duty.0,
        duty.1,
    ))
    .unwrap();
    exchange(&mut sim, "a", &deploy(&manifest(1, Platform::Spotsim, 250)));
    exchange(&mut sim, "a", &Command::Start(0));
    let evs = sim.advance_clock(60_000);
    let frames = data_frames(&sim, &evs);
    assert!(!frames.is_empty());
    for (_, f) in &frames {
        assert!(
            f.ts_ms % duty.0 < duty.1,
            "sample at {} while asleep",
            f.ts_ms
        );
    }
    let seqs: Vec<u32> = frames.iter().map(|(_, f)| f.seq).collect();
    assert_eq!(seqs, (1..=frames.len() as u32).collect::<Vec<_>>());
    assert!(evs
        .iter()
        .any(|e| e.kind == EventKind::SampleSkipped(SkipReason::Asleep)));
}

#[test]
fn threshold_reports_rising_edges_only() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 5.0, 10_000, 0.0, 1))],
    ))
    .unwrap();
    let m = with_rule(
        manifest(1, Platform::Spotsim, 500),
        ThresholdRule {
            comparator: Comparator::Gt,
            threshold: 23.0,
        },
    );
    exchange(&mut sim, "a", &deploy(&m));
    exchange(&mut sim, "a", &Command::Start(0));
    let evs = sim.advance_clock(50_000);
    let frames = data_frames(&sim, &evs);
    // one crossing per 10 s period
    assert_eq!(frames.len(), 5);
    for (_, f) in &frames {
        assert!(f.value > 23.0);
    }
}

#[test]
fn stop_and_restart_continue_the_sequence() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    exchange(
        &mut sim,
        "a",
        &deploy(&manifest(1, Platform::Spotsim, 1000)),
    );
    exchange(&mut sim, "a", &Command::Start(0));
    let mut evs = sim.advance_clock(3_000);
    exchange(&mut sim, "a", &Command::Stop(0));
    evs.extend(sim.advance_clock(5_000));
    let (r, _) = exchange(&mut sim, "a", &Command::State(0));
    let Reply::Ok { payload, .. } = r else {
        panic!()
    };
    assert_eq!(
        SlotReport::from_bytes(&payload).unwrap(),
        SlotReport {
            status: SlotStatus::Idle,
            next_seq: 4
        }
    );
    exchange(&mut sim, "a", &Command::Start(0));
    evs.extend(sim.advance_clock(2_000));
    let seqs: Vec<u32> = data_frames(&sim, &evs).iter().map(|(_, f)| f.seq).collect();
    assert_eq!(seqs, [1, 2, 3, 4, 5]);
}

#[test]
fn running_vs_undisturbed_by_neighbour_deploy() {
    let trace_a = |with_b: bool| {
        let mut sim = Sim::new(SimProfile::default());
        let mut n = spot("a", vec![temperature(signal(20.0, 1.0, 9_000, 0.1, 5))]);
        n.capacity = Some(4);
        sim.spawn_node(n).unwrap();
        exchange(&mut sim, "a", &deploy(&manifest(1, Platform::Spotsim, 700)));
        exchange(&mut sim, "a", &Command::Start(0));
        let mut evs = sim.advance_clock(5_000);
        if with_b {
            let (r, e) = exchange(&mut sim, "a", &deploy(&manifest(2, Platform::Spotsim, 300)));
            assert_eq!(r, Reply::ok(1));
            evs.extend(e);
            let (_, e) = exchange(&mut sim, "a", &Command::Start(1));
            evs.extend(e);
        }
        let end = 120_000;
        evs.extend(sim.advance_to(end));
        data_frames(&sim, &evs)
            .into_iter()
            .filter(|(_, f)| f.slot == 0 && f.ts_ms <= end)
            .map(|(_, f)| (f.seq, f.ts_ms, f.value.to_bits()))
            .collect::<Vec<_>>()
    };
    let alone = trace_a(false);
    let shared = trace_a(true);
    assert!(alone.len() > 100);
    assert_eq!(alone, shared);
}

#[test]
fn energy_reserve_blocks_commands() {
    let mut sim = Sim::new(SimProfile::instant());
    let mut n = spot("a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]);
    n.battery_j = 0.5;
    sim.spawn_node(n).unwrap();
    let (r, _) = exchange(
        &mut sim,
        "a",
        &deploy(&manifest(1, Platform::Spotsim, 1000)),
    );
    assert!(matches!(
        r,
        Reply::Err {
            code: ErrCode::Energy,
            ..
        }
    ));
    assert_eq!(sim.node("a").unwrap().battery_remaining_uj(), 500_000);
}

#[test]
fn corrupted_frame_is_badframe_without_cost() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    sim.inject_fault("a", Fault::CorruptInbound(1)).unwrap();
    let before = sim.node("a").unwrap().battery_remaining_uj();
    let (r, _) = exchange(&mut sim, "a", &Command::State(0));
    assert!(matches!(
        r,
        Reply::Err {
            code: ErrCode::BadFrame,
            ..
        }
    ));
    assert_eq!(sim.node("a").unwrap().battery_remaining_uj(), before);
}

#[derive(Debug, Clone)]
enum Op {
    Deploy(u64),
    Start(u8),
    Stop(u8),
    Delete(u8),
    State(u8),
    Garbage,
    Wait(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (100u64..1500).prop_map(Op::Deploy),
        (0u8..3).prop_map(Op::Start),
        (0u8..3).prop_map(Op::Stop),
        (0u8..3).prop_map(Op::Delete),
        (0u8..3).prop_map(Op::State),
        Just(Op::Garbage),
        (1u64..5_000).prop_map(Op::Wait),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn battery_books_balance(ops in prop::collection::vec(op(), 1..80), battery in 0.9f64..3.0) {
        let mut profile = SimProfile::instant();
        profile.spotsim.command_ms = 10;
        let mut sim = Sim::new(profile);
        let mut n = spot("a", vec![temperature(signal(20.0, 1.0, 2_000, 0.1, 3))]);
        n.battery_j = battery;
        n.capacity = Some(3);
        sim.spawn_node(n).unwrap();
        let codec = vwsn_core::wire::codec_for(Platform::Spotsim);
        let mut k = 0u128;
        let mut depleted_events = 0;
        for o in ops {
            let frame = match o {
                Op::Deploy(i) => { k += 1; codec.encode_command(&deploy(&manifest(k, Platform::Spotsim, i))).unwrap() }
                Op::Start(s) => codec.encode_command(&Command::Start(s)).unwrap(),
                Op::Stop(s) => codec.encode_command(&Command::Stop(s)).unwrap(),
                Op::Delete(s) => codec.encode_command(&Command::Delete(s)).unwrap(),
                Op::State(s) => codec.encode_command(&Command::State(s)).unwrap(),
                Op::Garbage => b"HELLO\n".to_vec(),
                Op::Wait(dt) => {
                    depleted_events += sim.advance_clock(dt).iter().filter(|e| e.kind == EventKind::EnergyDepleted).count();
                    continue;
                }
            };
            sim.deliver("a", frame, false).unwrap();
            depleted_events += sim.advance_clock(50).iter().filter(|e| e.kind == EventKind::EnergyDepleted).count();
        }
        let node = sim.node("a").unwrap();
        let spent = node.initial_battery_uj() - node.battery_remaining_uj();
        prop_assert_eq!(spent, sim.e_sample_uj() * node.samples_taken() + sim.e_cmd_uj() * node.commands_executed());
        prop_assert!(depleted_events <= 1);
        prop_assert_eq!(depleted_events == 1, node.is_depleted() && battery >= 1.0);
    }
}

#[test]
fn seq_per_slot_strictly_increases() {
    let mut sim = Sim::new(SimProfile::instant());
    sim.spawn_node(spot(
        "a",
        vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
    ))
    .unwrap();
    for (i, iv) in [300u64, 700, 1100].iter().enumerate() {
        exchange(
            &mut sim,
            "a",
            &deploy(&manifest(i as u128, Platform::Spotsim, *iv)),
        );
        exchange(&mut sim, "a", &Command::Start(i as u8));
    }
    let evs = sim.advance_clock(30_000);
    let mut last: BTreeMap<u8, u32> = BTreeMap::new();
    for (_, f) in data_frames(&sim, &evs) {
        let prev = last.insert(f.slot, f.seq).unwrap_or(0);
        assert_eq!(f.seq, prev + 1);
    }
    assert_eq!(last.len(), 3);
}

#[test]
fn shipped_config_files_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for t in ["smart-home.toml", "lab.toml"] {
        let topo = Topology::load(&dir.join(t)).unwrap();
        let mut sim = Sim::new(SimProfile::default());
        for n in topo.spawn_order() {
            sim.spawn_node(n.clone()).unwrap();
        }
    }
    let sunspot = vwsn_core::Scenario::load(&dir.join("sunspot-profile.toml")).unwrap();
    assert_eq!(
        sunspot,
        vwsn_core::Scenario {
            seed: 42,
            ..Default::default()
        }
    );
    let noisy = vwsn_core::Scenario::load(&dir.join("noisy-profile.toml")).unwrap();
    assert_eq!(noisy.jitter_sigma_ms, 150.0);
}
