//! Smart-home replay: the A/C follows a temperature rule and the deck lights
//! follow a light rule. Readings arrive over TCP at a listener owned by the
//! harness and are checked against the closed-form crossing times of the
//! node's (noise-free) sine signal.

use std::f64::consts::TAU;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use vwsn_core::model::{Capability, Comparator, VsState};
use vwsn_core::provisioning::{CreateRequest, TaskParams};
use vwsn_core::registry::SensorView;
use vwsn_core::sim::SignalParams;

use crate::{BenchError, Client};

const EPS_MS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SmartHomeConfig {
    /// A/C rule threshold; defaults to halfway up the thermometer's swing.
    pub temperature_threshold: Option<f64>,
    /// Deck light threshold; defaults to halfway down the light swing.
    pub light_threshold: Option<f64>,
    pub sampling_interval_ms: u64,
    /// Whole signal periods to run; at least one.
    pub periods: u64,
    /// How long to wait for readings still in flight.
    pub drain_timeout: Duration,
}

impl Default for SmartHomeConfig {
    fn default() -> Self {
        SmartHomeConfig {
            temperature_threshold: None,
            light_threshold: None,
            sampling_interval_ms: 1_000,
            periods: 2,
            drain_timeout: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rule {
    pub comparator: Comparator,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub seq: u32,
    pub ts_ms: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamReport {
    pub capability: Capability,
    pub vs_id: String,
    pub global_address: String,
    pub node_id: String,
    pub rule: Rule,
    pub signal: SignalParams,
    pub sampling_interval_ms: u64,
    pub started_at_ms: u64,
    pub events: Vec<Event>,
    /// Instants at which the rule becomes true, from the closed form.
    pub crossings_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub end_ms: u64,
    pub streams: Vec<StreamReport>,
}

impl ScenarioReport {
    pub fn stream(&self, c: Capability) -> Option<&StreamReport> {
        self.streams.iter().find(|s| s.capability == c)
    }
}

fn clean(sig: &SignalParams, t: f64) -> f64 {
    let p = sig.period_ms as f64;
    sig.base + sig.amplitude * (TAU * (t % p) / p).sin()
}

/// Instants in `[from, to]` at which `rule` goes from false to true on the
/// noise-free signal. `from` itself is included when the rule already holds
/// there, since the first sample then reports.
pub fn crossing_times(sig: &SignalParams, rule: Rule, from: u64, to: u64) -> Vec<f64> {
    let mut out = Vec::new();
    if rule
        .comparator
        .holds(clean(sig, from as f64), rule.threshold)
    {
        out.push(from as f64);
    }
    if sig.amplitude == 0.0 {
        return out;
    }
    let s = (rule.threshold - sig.base) / sig.amplitude;
    if s.is_nan() || s.abs() >= 1.0 {
        // out of reach, or only touched at a peak
        return out;
    }
    // rule true <=> sin(phase) above s, or below s, depending on the signs
    let upward = (rule.comparator == Comparator::Gt) == (sig.amplitude > 0.0);
    let phase = if upward {
        s.asin()
    } else {
        std::f64::consts::PI - s.asin()
    };
    let p = sig.period_ms as f64;
    let offset = phase.rem_euclid(TAU) / TAU * p;
    let mut k = ((from as f64 - offset) / p).floor();
    loop {
        let t = offset + k * p;
        if t > to as f64 {
            break;
        }
        if t > from as f64 {
            out.push(t);
        }
        k += 1.0;
    }
    out
}

/// Matches events to crossings: every crossing at least one interval before
/// the end has exactly one event no more than one interval after it, and
/// every event belongs to some crossing.
fn check_stream(s: &StreamReport, end_ms: u64) -> Result<(), String> {
    let interval = s.sampling_interval_ms as f64;
    let mut events = s.events.iter().peekable();
    for &c in &s.crossings_ms {
        let required = c + interval <= end_ms as f64;
        match events.peek() {
            Some(e) if (e.ts_ms as f64) < c - EPS_MS => {
                return Err(format!(
                    "{}: event at {} precedes any crossing",
                    s.capability, e.ts_ms
                ));
            }
            Some(e) if (e.ts_ms as f64) <= c + interval + EPS_MS => {
                events.next();
            }
            _ if required => {
                return Err(format!(
                    "{}: no event within {interval} ms of crossing at {c:.3}",
                    s.capability
                ));
            }
            _ => {}
        }
    }
    if let Some(e) = events.next() {
        return Err(format!(
            "{}: event at {} matches no crossing",
            s.capability, e.ts_ms
        ));
    }
    Ok(())
}

fn first_with(client: &Client, c: Capability) -> Result<SensorView, BenchError> {
    client
        .sensors(&[("capability", c.to_string()), ("available", "true".into())])?
        .into_iter()
        .next()
        .ok_or_else(|| BenchError::ScenarioFailure(format!("no available {c} sensor")))
}

struct Collector {
    lines: Arc<Mutex<Vec<String>>>,
    stop: Arc<AtomicBool>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Collector {
    fn spawn(listener: TcpListener) -> std::io::Result<Self> {
        listener.set_nonblocking(true)?;
        let lines = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let (l, s) = (Arc::clone(&lines), Arc::clone(&stop));
        let thread = thread::spawn(move || {
            let mut readers = Vec::new();
            while !s.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((conn, _)) => {
                        let l = Arc::clone(&l);
                        let s = Arc::clone(&s);
                        readers.push(thread::spawn(move || {
                            let _ = conn.set_nonblocking(false);
                            let _ = conn.set_read_timeout(Some(Duration::from_millis(50)));
                            let mut r = BufReader::new(conn);
                            let mut buf = String::new();
                            while !s.load(Ordering::Relaxed) {
                                match r.read_line(&mut buf) {
                                    Ok(0) => break,
                                    Ok(_) if buf.ends_with('\n') => {
                                        l.lock().unwrap().push(std::mem::take(&mut buf));
                                    }
                                    _ => {}
                                }
                            }
                        }));
                    }
                    Err(_) => thread::sleep(Duration::from_millis(5)),
                }
            }
            for r in readers {
                let _ = r.join();
            }
        });
        Ok(Collector {
            lines,
            stop,
            thread: Some(thread),
        })
    }

    fn count(&self) -> usize {
        self.lines.lock().unwrap().len()
    }
}

impl Drop for Collector {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Parses `DATA <vs> <seq> <ts_ms> <value> <unit>`.
fn parse_line(line: &str) -> Option<(String, Event)> {
    let mut it = line.split_whitespace();
    if it.next()? != "DATA" {
        return None;
    }
    let vs = it.next()?.to_string();
    let seq = it.next()?.parse().ok()?;
    let ts_ms = it.next()?.parse().ok()?;
    let value = it.next()?.parse().ok()?;
    Some((vs, Event { seq, ts_ms, value }))
}

pub fn run_smart_home(
    client: &Client,
    cfg: &SmartHomeConfig,
) -> Result<ScenarioReport, BenchError> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = listener.local_addr()?.to_string();
    let collector = Collector::spawn(listener)?;

    let mut plans = Vec::new();
    for (cap, comparator) in [
        (Capability::Temperature, Comparator::Gt),
        (Capability::Light, Comparator::Lt),
    ] {
        let node = first_with(client, cap)?;
        let decl = node
            .description
            .capabilities
            .iter()
            .find(|d| d.capability == cap)
            .expect("filtered on capability")
            .clone();
        let sig = decl.signal.clone();
        let threshold = match cap {
            Capability::Temperature => cfg.temperature_threshold,
            _ => cfg.light_threshold,
        }
        .unwrap_or(match comparator {
            Comparator::Gt => sig.base + sig.amplitude.abs() / 2.0,
            Comparator::Lt => sig.base - sig.amplitude.abs() / 2.0,
        });
        let r = decl.sampling_interval_ms;
        let interval = cfg.sampling_interval_ms.clamp(r.min, r.max);
        let req = CreateRequest {
            app_id: "smart-home".into(),
            node_id: Some(node.description.node_id.clone()),
            query: None,
            task: TaskParams {
                capability: cap,
                sampling_interval_ms: interval,
                unit: decl.native_unit(),
                endpoint: endpoint.clone(),
                threshold: Some(threshold),
                comparator: Some(comparator),
            },
            start_at: None,
            autostart: true,
        };
        plans.push((
            req,
            sig,
            Rule {
                comparator,
                threshold,
            },
        ));
    }

    let before = client.metrics()?.data.delivered;
    let mut streams = Vec::new();
    for (req, sig, rule) in plans {
        let vs = client.create(&req)?;
        if vs.state != VsState::Running {
            return Err(BenchError::ScenarioFailure(format!(
                "{} is {:?}, not running",
                vs.vs_id, vs.state
            )));
        }
        streams.push(StreamReport {
            capability: req.task.capability,
            vs_id: vs.vs_id,
            global_address: vs.global_address.to_string(),
            node_id: vs.node_id.unwrap_or_default(),
            rule,
            signal: sig,
            sampling_interval_ms: req.task.sampling_interval_ms,
            started_at_ms: vs.state_changed_at_ms,
            events: Vec::new(),
            crossings_ms: Vec::new(),
        });
    }
    let longest = streams
        .iter()
        .map(|s| s.signal.period_ms)
        .max()
        .unwrap_or(0);
    let last_start = streams.iter().map(|s| s.started_at_ms).max().unwrap_or(0);
    let end_ms = last_start + cfg.periods.max(1) * longest;
    client.advance_to(end_ms)?;
    for s in &streams {
        client.stop(&s.vs_id)?;
    }
    let expected = client.metrics()?.data.delivered - before;

    let deadline = Instant::now() + cfg.drain_timeout;
    while (collector.count() as u64) < expected && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    let lines = std::mem::take(&mut *collector.lines.lock().unwrap());
    drop(collector);
    for s in &streams {
        client.delete(&s.vs_id)?;
    }

    for line in &lines {
        let Some((vs, ev)) = parse_line(line) else {
            return Err(BenchError::Protocol(format!("bad data line {line:?}")));
        };
        if let Some(s) = streams.iter_mut().find(|s| s.global_address == vs) {
            s.events.push(ev);
        }
    }
    for s in &mut streams {
        s.events.sort_by_key(|e| e.ts_ms);
        s.crossings_ms = crossing_times(&s.signal, s.rule, s.started_at_ms, end_ms);
    }
    let report = ScenarioReport { end_ms, streams };
    for s in &report.streams {
        if s.signal.noise_sigma != 0.0 {
            return Err(BenchError::ScenarioFailure(format!(
                "{} signal is noisy; crossings have no closed form",
                s.capability
            )));
        }
        check_stream(s, end_ms).map_err(BenchError::ScenarioFailure)?;
        let straddles = (s.signal.base - s.rule.threshold).abs() < s.signal.amplitude.abs();
        if straddles && s.events.is_empty() {
            return Err(BenchError::ScenarioFailure(format!(
                "no {} events",
                s.capability
            )));
        }
    }
    Ok(report)
}
