use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use vwsn_api::{pace_realtime, router, AppState, TcpSink};
use vwsn_core::sim::Topology;
use vwsn_core::{Infrastructure, Scenario};

/// Virtualized WSN infrastructure with its REST access interface.
#[derive(Debug, Parser)]
#[command(name = "vwsn-iaas", version)]
struct Args {
    /// Node topology (TOML, `[[node]]` tables).
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Delay, energy and service settings (TOML). Defaults apply when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Advance the virtual clock with the wall clock.
    #[arg(long)]
    realtime: bool,
    /// Write a registry snapshot here at startup and on shutdown.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

async fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let scenario = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    let topology = Topology::load(&args.topology)?;
    let infra = Infrastructure::new(scenario, &topology, Box::new(TcpSink::spawn()))?;
    log::info!(
        "{} nodes loaded from {}",
        topology.nodes.len(),
        args.topology.display()
    );
    if let Some(p) = &args.snapshot {
        infra.snapshot(p)?;
    }
    let state = AppState::new(infra);
    if args.realtime {
        tokio::spawn(pace_realtime(state.shared(), Duration::from_millis(20)));
    }
    let shared = state.shared();
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(p) = &args.snapshot {
        shared
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .snapshot(p)?;
        log::info!("registry snapshot written to {}", p.display());
    }
    Ok(())
}
