//! PaaS-side measurement client: repeats VS creation and start against the
//! IaaS REST interface, reads the server-side delays back from the metrics
//! endpoint and summarizes them; also replays the smart-home application.

mod client;
mod experiment;
mod scenario;
mod stats;

pub use client::Client;
pub use experiment::{
    read_csv, run_vscd, run_vsst, write_csv, CsvRow, ExperimentConfig, ExperimentResult, Mode,
};
pub use scenario::{
    crossing_times, run_smart_home, Event, Rule, ScenarioReport, SmartHomeConfig, StreamReport,
};
pub use stats::{stats, t975, StatsError, Summary};

use std::net::SocketAddr;
use std::path::Path;

use thiserror::Error;
use vwsn_api::{Background, TcpSink};
use vwsn_core::sim::Topology;
use vwsn_core::{Infrastructure, Scenario};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("at least 2 iterations are needed, got {0}")]
    InsufficientIterations(usize),
    #[error("service answered {status} {code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
    #[error("unexpected reply: {0}")]
    Protocol(String),
    #[error("scenario failed: {0}")]
    ScenarioFailure(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One SPOTSIM thermometer, used when no topology is given.
pub const DEFAULT_TOPOLOGY: &str = r#"
[[node]]
id = "bench-0"
platform = "spotsim"
location = { lat = 45.5, lon = -73.57 }
battery_j = 720.0
capacity = 4

[[node.capability]]
capability = "temperature"
units = ["celsius"]
sampling_interval_ms = { min = 100, max = 600000 }
signal = { base = 21.0, amplitude = 1.5, period_ms = 60000 }
"#;

/// Starts an in-process service on a free loopback port. Readings go out
/// over TCP exactly as they would from a standalone server.
pub fn local_service(scenario: Scenario, topology: &Topology) -> Result<Background, BenchError> {
    let infra = Infrastructure::new(scenario, topology, Box::new(TcpSink::spawn()))
        .map_err(|e| BenchError::Setup(e.to_string()))?;
    let any: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
    Ok(Background::spawn(infra, any)?)
}

pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, BenchError> {
    match path {
        Some(p) => Scenario::load(p).map_err(|e| BenchError::Setup(e.to_string())),
        None => Ok(Scenario::default()),
    }
}

pub fn load_topology(path: Option<&Path>) -> Result<Topology, BenchError> {
    match path {
        Some(p) => Topology::load(p),
        None => Topology::from_toml(DEFAULT_TOPOLOGY),
    }
    .map_err(|e| BenchError::Setup(e.to_string()))
}
