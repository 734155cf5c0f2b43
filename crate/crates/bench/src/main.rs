use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vwsn_bench::{
    load_scenario, load_topology, local_service, run_smart_home, run_vscd, run_vsst, write_csv,
    BenchError, Client, ExperimentConfig, ExperimentResult, Mode, SmartHomeConfig,
};

/// Measurement client for the vWSN IaaS.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    /// Talk to a running service instead of starting one in-process.
    #[arg(long, global = true)]
    url: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Session {
    Warm,
    Cold,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// VS creation delay.
    Vscd {
        #[arg(long, value_enum, default_value = "warm")]
        mode: Session,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        /// Delay profile (scenario TOML) for the in-process service.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// VS start time.
    Vsst {
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end application scenarios.
    Scenario {
        #[arg(value_parser = ["smart-home"])]
        name: String,
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        temperature_threshold: Option<f64>,
        #[arg(long)]
        light_threshold: Option<f64>,
        #[arg(long, default_value_t = 2)]
        periods: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("FAIL: {e}");
            ExitCode::FAILURE
        }
    }
}

fn with_client<T>(
    url: Option<String>,
    profile: Option<PathBuf>,
    topology: Option<PathBuf>,
    f: impl FnOnce(&Client) -> Result<T, BenchError>,
) -> Result<T, BenchError> {
    match url {
        Some(u) => f(&Client::new(u)?),
        None => {
            let service = local_service(
                load_scenario(profile.as_deref())?,
                &load_topology(topology.as_deref())?,
            )?;
            f(&Client::new(service.url())?)
        }
    }
}

fn emit(result: &ExperimentResult, out: Option<PathBuf>) -> Result<(), BenchError> {
    match out {
        Some(p) => write_csv(
            BufWriter::new(File::create(p)?),
            std::slice::from_ref(result),
        )?,
        None => write_csv(std::io::stdout().lock(), std::slice::from_ref(result))?,
    }
    eprintln!("{}: {}", result.metric, result.summary);
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Vscd {
            mode,
            iterations,
            profile,
            topology,
            out,
        } => {
            let mode = match mode {
                Session::Warm => Mode::VscdWarm,
                Session::Cold => Mode::VscdCold,
            };
            let r = with_client(cli.url, profile, topology, |c| {
                run_vscd(c, &ExperimentConfig::new(mode, iterations))
            })?;
            emit(&r, out)
        }
        Cmd::Vsst {
            iterations,
            profile,
            topology,
            out,
        } => {
            let r = with_client(cli.url, profile, topology, |c| {
                run_vsst(c, &ExperimentConfig::new(Mode::Vsst, iterations))
            })?;
            emit(&r, out)
        }
        Cmd::Scenario {
            name: _,
            topology,
            profile,
            temperature_threshold,
            light_threshold,
            periods,
        } => {
            let cfg = SmartHomeConfig {
                temperature_threshold,
                light_threshold,
                periods,
                ..SmartHomeConfig::default()
            };
            let report = with_client(cli.url, profile, topology, |c| run_smart_home(c, &cfg))?;
            for s in &report.streams {
                println!(
                    "{} on {} ({} {} {}): {} events, {} crossings",
                    s.capability,
                    s.node_id,
                    s.capability,
                    s.rule.comparator.as_str(),
                    s.rule.threshold,
                    s.events.len(),
                    s.crossings_ms.len()
                );
                for e in &s.events {
                    println!("  t={} seq={} value={}", e.ts_ms, e.seq, e.value);
                }
            }
            println!("PASS");
            Ok(())
        }
    }
}
