mod common;

use std::collections::{BTreeMap, VecDeque};

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uuid::Uuid;
use vwsn_core::model::{geo_distance_m, Capability, Comparator, GeoPoint, TaskManifest, Unit};
use vwsn_core::provisioning::{
    configure, ConfigureError, CreateRequest, EntryStatus, RecentSensorCache, ScheduleError,
    Scheduler, TaskParams,
};
use vwsn_core::registry::{DiscoveryQuery, SensorDescription};
use vwsn_core::sim::{EnergyModel, NodeConfig, Topology};
use vwsn_core::{ErrorCode, Infrastructure, Scenario};

fn quiet_scenario(cache: usize) -> Scenario {
    Scenario {
        cache_capacity: cache,
        energy: EnergyModel {
            sample_j: 0.0,
            command_j: 0.0,
            reserve_j: 0.0,
        },
        ..Scenario::instant()
    }
}

fn task() -> TaskParams {
    TaskParams {
        capability: Capability::Temperature,
        sampling_interval_ms: 1_000,
        unit: Unit::Celsius,
        endpoint: "127.0.0.1:9000".into(),
        threshold: None,
        comparator: None,
    }
}

fn by_query(center: GeoPoint) -> CreateRequest {
    CreateRequest {
        app_id: "app".into(),
        node_id: None,
        query: Some(DiscoveryQuery {
            center: Some(center),
            ..Default::default()
        }),
        task: task(),
        start_at: None,
        autostart: false,
    }
}

fn scattered(rng: &mut ChaCha8Rng, n: usize) -> Vec<NodeConfig> {
    (0..n)
        .map(|i| {
            let mut c = spot(
                &format!("n{i:02}"),
                vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))],
            );
            c.location =
                GeoPoint::new(rng.random_range(45.0..46.0), rng.random_range(-74.0..-73.0))
                    .unwrap();
            c.capacity = Some(rng.random_range(2..=7));
            c
        })
        .collect()
}

#[test]
fn greedy_allocation_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let nodes = scattered(&mut rng, 10);
    let topo = Topology {
        nodes: nodes.clone(),
    };
    let mut infra = Infrastructure::new(
        quiet_scenario(0),
        &topo,
        Box::new(vwsn_core::manager::NullSink),
    )
    .unwrap();
    let center = GeoPoint::new(45.5, -73.5).unwrap();

    // oracle: least loaded node with room, nearest first, then by id
    let mut load: BTreeMap<String, u8> = nodes.iter().map(|n| (n.node_id.clone(), 0)).collect();
    for k in 0..50 {
        let want = nodes
            .iter()
            .filter(|n| load[&n.node_id] < n.capacity.unwrap())
            .min_by(|a, b| {
                load[&a.node_id]
                    .cmp(&load[&b.node_id])
                    .then(
                        geo_distance_m(center, a.location)
                            .partial_cmp(&geo_distance_m(center, b.location))
                            .unwrap(),
                    )
                    .then(a.node_id.cmp(&b.node_id))
            })
            .map(|n| n.node_id.clone());
        match (infra.create(by_query(center)), want) {
            (Ok(v), Some(w)) => {
                assert_eq!(v.node_id.as_deref(), Some(w.as_str()), "request {k}");
                *load.get_mut(&w).unwrap() += 1;
            }
            (Err(e), None) => assert_eq!(e.code(), ErrorCode::NoCandidateNode),
            (got, want) => panic!("request {k}: got {got:?}, oracle {want:?}"),
        }
    }
    let total: u32 = nodes.iter().map(|n| n.capacity.unwrap() as u32).sum();
    assert_eq!(infra.list().len() as u32, total.min(50));
}

#[test]
fn cache_sticks_to_the_previous_choice_while_valid() {
    let a = spot("a", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]);
    let mut b = spot("b", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]);
    b.location = GeoPoint::new(45.6, -73.6).unwrap();
    let topo = Topology { nodes: vec![a, b] };
    let mut infra = Infrastructure::new(
        quiet_scenario(4),
        &topo,
        Box::new(vwsn_core::manager::NullSink),
    )
    .unwrap();
    let center = GeoPoint::new(45.5, -73.6).unwrap();
    let picks: Vec<String> = (0..5)
        .map(|_| infra.create(by_query(center)).unwrap().node_id.unwrap())
        .collect();
    // without the cache the second request would go to the idle node b
    assert_eq!(picks, ["a", "a", "a", "a", "b"]);
    let stats = infra.metrics().cache;
    assert_eq!((stats.hits, stats.stale, stats.misses), (3, 1, 2));
}

#[test]
fn configure_rejects_what_the_node_cannot_do() {
    let node = SensorDescription::from_config(
        &spot("n", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
        0.0,
    );
    let id = Uuid::from_u128(1);
    let mut t = task();
    t.sampling_interval_ms = 50;
    assert_eq!(
        configure(&t, &node, id),
        Err(ConfigureError::IntervalOutOfRange {
            requested: 50,
            min: 100,
            max: 60_000
        })
    );
    let mut t = task();
    t.capability = Capability::Light;
    t.unit = Unit::Lux;
    assert!(matches!(
        configure(&t, &node, id),
        Err(ConfigureError::UnsupportedCapability { .. })
    ));
    let mut t = task();
    t.unit = Unit::Lux;
    assert!(matches!(
        configure(&t, &node, id),
        Err(ConfigureError::InvalidParams(_))
    ));
    let mut t = task();
    t.endpoint = "nohost".into();
    assert!(matches!(
        configure(&t, &node, id),
        Err(ConfigureError::InvalidParams(_))
    ));
    let mut t = task();
    t.threshold = Some(3.0);
    assert!(matches!(
        configure(&t, &node, id),
        Err(ConfigureError::InvalidParams(_))
    ));
}

#[test]
fn foreign_unit_is_converted_on_the_node_side() {
    let mut decl = temperature(signal(20.0, 0.0, 1000, 0.0, 1));
    decl.units = vec![Unit::Celsius];
    let node = SensorDescription::from_config(&spot("n", vec![decl]), 0.0);
    let t = TaskParams {
        unit: Unit::Fahrenheit,
        threshold: Some(212.0),
        comparator: Some(Comparator::Gt),
        ..task()
    };
    let m = configure(&t, &node, Uuid::from_u128(1)).unwrap();
    assert_eq!(m.unit, Unit::Celsius);
    let rule = m.rule.unwrap();
    assert!((rule.threshold - 100.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn configure_is_canonical(
        interval in 100u64..60_000,
        threshold in prop::option::of(-100.0f64..100.0),
        id in any::<u128>(),
    ) {
        let node = SensorDescription::from_config(
            &spot("n", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
            0.0,
        );
        let t = TaskParams {
            sampling_interval_ms: interval,
            comparator: threshold.map(|_| Comparator::Lt),
            threshold,
            ..task()
        };
        let a = configure(&t, &node, Uuid::from_u128(id)).unwrap();
        let b = configure(&t.clone(), &node, Uuid::from_u128(id)).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        prop_assert_eq!(TaskManifest::from_bytes(&a.to_bytes()).unwrap(), a);
    }
}

#[test]
fn negative_zero_threshold_is_canonical() {
    let node = SensorDescription::from_config(
        &spot("n", vec![temperature(signal(20.0, 0.0, 1000, 0.0, 1))]),
        0.0,
    );
    let with = |t: f64| TaskParams {
        threshold: Some(t),
        comparator: Some(Comparator::Gt),
        ..task()
    };
    let id = Uuid::from_u128(9);
    assert_eq!(
        configure(&with(-0.0), &node, id).unwrap().to_bytes(),
        configure(&with(0.0), &node, id).unwrap().to_bytes()
    );
}

#[test]
fn hundred_random_entries_fire_in_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut s: Scheduler<u32> = Scheduler::new();
    let mut expected = Vec::new();
    for k in 0..100u32 {
        let due = rng.random_range(0..10_000);
        let id = s.schedule(k, due, 0).unwrap();
        expected.push((due, id, k));
    }
    let cancelled: Vec<u64> = expected.iter().step_by(7).map(|e| e.1).collect();
    for id in &cancelled {
        s.cancel(*id).unwrap();
    }
    expected.retain(|e| !cancelled.contains(&e.1));
    expected.sort();
    let mut fired = Vec::new();
    let mut now = 0;
    while now <= 10_000 {
        while let Some((id, a)) = s.pop_due(now) {
            let e = s.get(id).unwrap();
            assert!(e.due_ms <= now);
            fired.push((e.due_ms, id, a));
        }
        now += rng.random_range(1..300);
    }
    while let Some((id, a)) = s.pop_due(u64::MAX) {
        fired.push((s.get(id).unwrap().due_ms, id, a));
    }
    assert_eq!(fired, expected);
    assert_eq!(
        s.cancel(fired[0].1),
        Err(ScheduleError::AlreadyFired(fired[0].1))
    );
    assert_eq!(
        s.cancel(cancelled[0]),
        Err(ScheduleError::AlreadyCancelled(cancelled[0]))
    );
    assert_eq!(s.cancel(10_000), Err(ScheduleError::UnknownId(10_000)));
    assert_eq!(s.get(cancelled[0]).unwrap().status, EntryStatus::Cancelled);
    assert_eq!(
        s.schedule(0, 5, 6),
        Err(ScheduleError::PastDue {
            due_ms: 5,
            now_ms: 6
        })
    );
}

#[derive(Debug, Clone)]
enum CacheOp {
    Lookup(u8),
    Insert(u8, u8),
    Evict(u8),
}

proptest! {
    #[test]
    fn lru_matches_model(cap in 0usize..6, ops in prop::collection::vec(
        prop_oneof![
            (0u8..10).prop_map(CacheOp::Lookup),
            (0u8..10, 0u8..5).prop_map(|(k, v)| CacheOp::Insert(k, v)),
            (0u8..10).prop_map(CacheOp::Evict),
        ],
        0..200,
    )) {
        let mut cache = RecentSensorCache::new(cap);
        // model: most recent at the back
        let mut model: VecDeque<(String, String)> = VecDeque::new();
        for op in ops {
            match op {
                CacheOp::Lookup(k) => {
                    let k = k.to_string();
                    let want = model.iter().position(|e| e.0 == k).map(|i| {
                        let e = model.remove(i).unwrap();
                        let v = e.1.clone();
                        model.push_back(e);
                        v
                    });
                    prop_assert_eq!(cache.lookup(&k), want);
                }
                CacheOp::Insert(k, v) => {
                    let (k, v) = (k.to_string(), format!("node{v}"));
                    let mut evicted = None;
                    if cap > 0 {
                        model.retain(|e| e.0 != k);
                        model.push_back((k.clone(), v.clone()));
                        if model.len() > cap {
                            evicted = model.pop_front();
                        }
                    }
                    prop_assert_eq!(cache.insert(&k, &v), evicted);
                }
                CacheOp::Evict(k) => {
                    let k = k.to_string();
                    let before = model.len();
                    model.retain(|e| e.0 != k);
                    prop_assert_eq!(cache.evict(&k), model.len() != before);
                }
            }
            prop_assert!(cache.len() <= cap);
            let keys: Vec<String> = model.iter().rev().map(|e| e.0.clone()).collect();
            prop_assert_eq!(cache.keys(), keys);
        }
    }
}
