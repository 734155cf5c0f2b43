use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use vwsn_core::model::{Capability, Unit};
use vwsn_core::provisioning::{CreateRequest, TaskParams};
use vwsn_core::registry::DiscoveryQuery;

use crate::{stats, BenchError, Client, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One base-station session shared by every iteration.
    VscdWarm,
    /// The session is torn down before each creation.
    VscdCold,
    Vsst,
}

impl Mode {
    pub fn metric(self) -> &'static str {
        match self {
            Mode::VscdWarm => "vscd_warm",
            Mode::VscdCold => "vscd_cold",
            Mode::Vsst => "vsst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub iterations: usize,
    /// Where the created VSs would push their readings; they are never
    /// started during creation runs, so any address will do.
    pub endpoint: String,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, iterations: usize) -> Self {
        ExperimentConfig {
            mode,
            iterations,
            endpoint: "127.0.0.1:9".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub metric: String,
    pub samples: Vec<f64>,
    pub summary: Summary,
}

/// Picks the first temperature node and a task it accepts.
fn probe(client: &Client, endpoint: &str) -> Result<CreateRequest, BenchError> {
    let found = client.sensors(&[("capability", "temperature".into())])?;
    let node = found
        .first()
        .ok_or_else(|| BenchError::Setup("no temperature sensor registered".into()))?;
    let decl = node
        .description
        .capabilities
        .iter()
        .find(|c| c.capability == Capability::Temperature)
        .expect("query filtered on capability");
    Ok(CreateRequest {
        app_id: "bench".into(),
        node_id: Some(node.description.node_id.clone()),
        query: None::<DiscoveryQuery>,
        task: TaskParams {
            capability: Capability::Temperature,
            sampling_interval_ms: decl
                .sampling_interval_ms
                .max
                .min(1_000)
                .max(decl.sampling_interval_ms.min),
            unit: decl.units.first().copied().unwrap_or(Unit::Celsius),
            endpoint: endpoint.to_string(),
            threshold: None,
            comparator: None,
        },
        start_at: None,
        autostart: false,
    })
}

fn check(cfg: &ExperimentConfig) -> Result<(), BenchError> {
    if cfg.iterations < 2 {
        return Err(BenchError::InsufficientIterations(cfg.iterations));
    }
    Ok(())
}

fn finish(mode: Mode, samples: Vec<f64>) -> Result<ExperimentResult, BenchError> {
    let summary = stats(&samples)?;
    Ok(ExperimentResult {
        metric: mode.metric().into(),
        samples,
        summary,
    })
}

/// Creation delay, warm or cold, one create/delete pair per iteration.
pub fn run_vscd(client: &Client, cfg: &ExperimentConfig) -> Result<ExperimentResult, BenchError> {
    check(cfg)?;
    let cold = match cfg.mode {
        Mode::VscdWarm => false,
        Mode::VscdCold => true,
        Mode::Vsst => return Err(BenchError::Setup("run_vscd needs a vscd mode".into())),
    };
    let req = probe(client, &cfg.endpoint)?;
    if !cold {
        client.open_session()?;
    }
    let mut samples = Vec::with_capacity(cfg.iterations);
    for i in 0..cfg.iterations {
        if cold {
            client.close_session()?;
        }
        let vs = client.create(&req)?;
        let m = client.metrics()?;
        let s = m
            .vscd
            .iter()
            .rev()
            .find(|s| s.vs_id == vs.vs_id)
            .ok_or_else(|| BenchError::Protocol(format!("no creation delay for {}", vs.vs_id)))?;
        log::debug!("{} #{i}: {} ms", cfg.mode.metric(), s.value_ms);
        samples.push(s.value_ms as f64);
        client.delete(&vs.vs_id)?;
    }
    finish(cfg.mode, samples)
}

/// Start time: each iteration deploys a fresh VS, starts it, then removes it.
pub fn run_vsst(client: &Client, cfg: &ExperimentConfig) -> Result<ExperimentResult, BenchError> {
    check(cfg)?;
    let req = probe(client, &cfg.endpoint)?;
    let mut samples = Vec::with_capacity(cfg.iterations);
    for i in 0..cfg.iterations {
        let vs = client.create(&req)?;
        client.start(&vs.vs_id)?;
        let m = client.metrics()?;
        let s = m
            .vsst
            .iter()
            .rev()
            .find(|s| s.vs_id == vs.vs_id)
            .ok_or_else(|| BenchError::Protocol(format!("no start time for {}", vs.vs_id)))?;
        log::debug!("vsst #{i}: {} ms", s.value_ms);
        samples.push(s.value_ms as f64);
        client.stop(&vs.vs_id)?;
        client.delete(&vs.vs_id)?;
    }
    finish(Mode::Vsst, samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub iteration: usize,
    pub metric: String,
    pub value_ms: f64,
}

/// `iteration,metric,value_ms`, one row per sample, iterations from 1.
pub fn write_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in results {
        for (i, v) in r.samples.iter().enumerate() {
            w.serialize(CsvRow {
                iteration: i + 1,
                metric: r.metric.clone(),
                value_ms: *v,
            })?;
        }
    }
    if results.iter().all(|r| r.samples.is_empty()) {
        w.write_record(["iteration", "metric", "value_ms"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
