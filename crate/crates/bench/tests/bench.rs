use std::cell::RefCell;
use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vwsn_bench::{
    load_topology, local_service, read_csv, run_smart_home, run_vscd, run_vsst, stats, t975,
    write_csv, BenchError, Client, ExperimentConfig, Mode, SmartHomeConfig, StatsError,
};
use vwsn_core::model::Capability;
use vwsn_core::sim::Topology;
use vwsn_core::Scenario;

const HOME: &str = include_str!("../../../configs/smart-home.toml");

// Student-t CDF by quadrature: with x = sqrt(v) tan(a) the density becomes
// proportional to cos(a)^(v-1) on (-pi/2, pi/2).
fn simpson(v: usize, hi: f64) -> f64 {
    let n = 20_000;
    let h = hi / n as f64;
    let f = |a: f64| a.cos().powi(v as i32 - 1);
    let mut s = f(0.0) + f(hi);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn oracle_t975(v: usize) -> f64 {
    thread_local! {
        static MEMO: RefCell<HashMap<usize, f64>> = RefCell::new(HashMap::new());
    }
    if let Some(t) = MEMO.with(|m| m.borrow().get(&v).copied()) {
        return t;
    }
    let whole = simpson(v, std::f64::consts::FRAC_PI_2);
    let cdf = |x: f64| 0.5 + 0.5 * simpson(v, (x / (v as f64).sqrt()).atan()) / whole;
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < 0.975 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    MEMO.with(|m| m.borrow_mut().insert(v, t));
    t
}

// Welford's running mean and variance.
fn oracle_stats(xs: &[f64]) -> (f64, f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for &x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let sd = (m2 / (n - 1.0)).sqrt();
    (mean, sd, oracle_t975(xs.len() - 1) * sd / n.sqrt())
}

#[test]
fn constant_data_has_no_spread() {
    let s = stats(&[5.0, 5.0, 5.0]).unwrap();
    assert_eq!((s.mean, s.stddev, s.ci95_half_width), (5.0, 0.0, 0.0));
}

#[test]
fn three_point_interval() {
    let s = stats(&[14.0, 15.0, 16.0]).unwrap();
    assert_eq!((s.mean, s.stddev), (15.0, 1.0));
    assert!(
        (s.ci95_half_width - 2.484).abs() < 5e-4,
        "{}",
        s.ci95_half_width
    );
    assert!((t975(2) - 4.30265).abs() < 1e-5);
    assert!((t975(49) - 2.00958).abs() < 1e-5);
}

#[test]
fn too_few_samples() {
    assert_eq!(stats(&[]), Err(StatsError::InsufficientData(0)));
    assert_eq!(stats(&[1.0]), Err(StatsError::InsufficientData(1)));
    assert_eq!(stats(&[1.0, f64::NAN]), Err(StatsError::NotFinite(1)));
}

#[test]
fn fifty_normal_samples_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let normal = Normal::new(14_973.0, 250.0).unwrap();
    let xs: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
    let s = stats(&xs).unwrap();
    let (m, sd, ci) = oracle_stats(&xs);
    assert!((s.mean - m).abs() <= 1e-9 * m.abs());
    assert!((s.stddev - sd).abs() <= 1e-9 * sd);
    assert!(
        (s.ci95_half_width - ci).abs() <= 1e-9 * ci,
        "{} vs {ci}",
        s.ci95_half_width
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn stats_match_reference(xs in prop::collection::vec(-1e6f64..1e6, 2..60)) {
        let s = stats(&xs).unwrap();
        let (m, sd, ci) = oracle_stats(&xs);
        prop_assert!((s.mean - m).abs() <= 1e-9 * (1.0 + m.abs()));
        prop_assert!((s.stddev - sd).abs() <= 1e-9 * (1.0 + sd));
        prop_assert!((s.ci95_half_width - ci).abs() <= 1e-9 * (1.0 + ci));
    }
}

fn service(scenario: Scenario) -> vwsn_api::Background {
    local_service(scenario, &load_topology(None).unwrap()).unwrap()
}

#[test]
fn warm_and_cold_creation_delays() {
    let svc = service(Scenario::default());
    let c = Client::new(svc.url()).unwrap();
    let warm = run_vscd(&c, &ExperimentConfig::new(Mode::VscdWarm, 50)).unwrap();
    let cold = run_vscd(&c, &ExperimentConfig::new(Mode::VscdCold, 50)).unwrap();
    // 11000 build + 473 per KB for a 1 KB manifest + 3500 sync
    assert!(warm.samples.iter().all(|&v| v == 14_973.0));
    for (w, k) in warm.samples.iter().zip(&cold.samples) {
        assert_eq!(k - w, 9_309.0);
    }
    let ratio = cold.summary.mean / warm.summary.mean;
    assert!((ratio - 1.6217).abs() < 0.01, "{ratio}");
    assert_eq!(warm.summary.ci95_half_width, 0.0);
}

#[test]
fn start_time_without_noise() {
    let svc = service(Scenario::default());
    let c = Client::new(svc.url()).unwrap();
    let r = run_vsst(&c, &ExperimentConfig::new(Mode::Vsst, 50)).unwrap();
    assert_eq!((r.summary.mean, r.summary.ci95_half_width), (4_200.0, 0.0));
}

fn noisy() -> Scenario {
    Scenario {
        jitter_sigma_ms: 150.0,
        seed: 99,
        ..Scenario::default()
    }
}

#[test]
fn noisy_start_times_stay_in_bounds() {
    let svc = service(noisy());
    let c = Client::new(svc.url()).unwrap();
    let r = run_vsst(&c, &ExperimentConfig::new(Mode::Vsst, 50)).unwrap();
    assert!(r.summary.stddev > 0.0);
    for v in &r.samples {
        assert!((v - r.summary.mean).abs() <= 5.0 * 150.0, "{v}");
    }
}

fn csv_of(scenario: Scenario) -> Vec<u8> {
    let svc = service(scenario);
    let c = Client::new(svc.url()).unwrap();
    let results = [
        run_vscd(&c, &ExperimentConfig::new(Mode::VscdWarm, 10)).unwrap(),
        run_vscd(&c, &ExperimentConfig::new(Mode::VscdCold, 10)).unwrap(),
        run_vsst(&c, &ExperimentConfig::new(Mode::Vsst, 10)).unwrap(),
    ];
    let mut out = Vec::new();
    write_csv(&mut out, &results).unwrap();

    // recomputing from the CSV reproduces every summary exactly
    let rows = read_csv(out.as_slice()).unwrap();
    for r in &results {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|row| row.metric == r.metric)
            .map(|row| row.value_ms)
            .collect();
        assert_eq!(stats(&xs).unwrap(), r.summary);
    }
    out
}

#[test]
fn csv_layout_and_determinism() {
    let a = csv_of(noisy());
    let text = String::from_utf8(a.clone()).unwrap();
    assert!(text.starts_with("iteration,metric,value_ms\n1,vscd_warm,"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 31);
    assert_eq!(a, csv_of(noisy()));
    let other = Scenario {
        seed: 100,
        ..noisy()
    };
    assert_ne!(a, csv_of(other));
}

#[test]
fn one_iteration_is_not_an_experiment() {
    let svc = service(Scenario::instant());
    let c = Client::new(svc.url()).unwrap();
    assert!(matches!(
        run_vscd(&c, &ExperimentConfig::new(Mode::VscdWarm, 1)),
        Err(BenchError::InsufficientIterations(1))
    ));
}

#[test]
fn unreachable_service() {
    let c = Client::new("http://127.0.0.1:1").unwrap();
    assert!(matches!(
        run_vsst(&c, &ExperimentConfig::new(Mode::Vsst, 2)),
        Err(BenchError::ServiceUnreachable(_))
    ));
}

fn home() -> vwsn_api::Background {
    local_service(Scenario::default(), &Topology::from_toml(HOME).unwrap()).unwrap()
}

#[test]
fn smart_home_events_follow_the_signal() {
    let svc = home();
    let c = Client::new(svc.url()).unwrap();
    let report = run_smart_home(&c, &SmartHomeConfig::default()).unwrap();
    for cap in [Capability::Temperature, Capability::Light] {
        let s = report.stream(cap).unwrap();
        assert!(!s.events.is_empty(), "{cap}");
        for e in &s.events {
            assert!(s.rule.comparator.holds(e.value, s.rule.threshold));
        }
    }
}

#[test]
fn thresholds_out_of_range_give_no_events() {
    let svc = home();
    let c = Client::new(svc.url()).unwrap();
    let cfg = SmartHomeConfig {
        temperature_threshold: Some(40.0),
        light_threshold: Some(50.0),
        ..SmartHomeConfig::default()
    };
    let report = run_smart_home(&c, &cfg).unwrap();
    assert!(report
        .streams
        .iter()
        .all(|s| s.events.is_empty() && s.crossings_ms.is_empty()));
}
