use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pointgo_cli::headless::{self, RunConfig};
use pointgo_cli::{ServeConfig, Server};
use pointgo_core::batch::BenchMatrix;
use pointgo_core::control::ControlSystem;
use pointgo_core::metrics::MetricsConfig;
use pointgo_core::sim::DEFAULT_DT;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "pointgo", version, about = "Point-and-Go teleoperation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live websocket session server.
    Serve {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Built-in scenario id or scenario file.
        #[arg(long, default_value = "orient_target")]
        scenario: String,
        #[arg(long, default_value = "png")]
        system: ControlSystem,
        #[arg(long, env = "POINTGO_PORT", default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Session log to write.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        tick_rate: f64,
        /// Broadcast state every N ticks.
        #[arg(long, default_value_t = 1)]
        decimation: u32,
    },
    /// Run a seeded scripted-agent matrix and write records.csv and report.json.
    Bench {
        /// Matrix file; the default matrix when omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        gains: Option<PathBuf>,
    },
    /// Run scripted-agent episodes without networking.
    Run {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "png")]
        system: ControlSystem,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        episodes: u32,
        #[arg(long)]
        record: Option<PathBuf>,
        /// Directory for records.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a session log and compare metrics with the recorded ones.
    Replay {
        #[arg(long)]
        session: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("POINTGO_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve {
            chain,
            gains,
            scenario,
            system,
            port,
            host,
            seed,
            record,
            tick_rate,
            decimation,
        } => {
            let config = ServeConfig {
                chain: headless::load_chain(chain.as_deref())?,
                gains: headless::load_gains(gains.as_deref())?,
                scenario: headless::load_scenario(&scenario)?,
                system,
                seed,
                tick_rate,
                decimation,
                addr: SocketAddr::new(host, port),
                record,
                metrics: MetricsConfig::default(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(async {
                let server = Server::bind(config).await?;
                println!("listening on ws://{}", server.local_addr());
                server
                    .run(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
            println!("{} ticks, {} episodes", summary.ticks, summary.episodes.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            matrix,
            out,
            chain,
            gains,
        } => {
            let matrix = match matrix {
                Some(p) => BenchMatrix::from_file(&p).with_context(|| format!("loading matrix {}", p.display()))?,
                None => BenchMatrix::default(),
            };
            let chain = headless::load_chain(chain.as_deref())?;
            let gains = headless::load_gains(gains.as_deref())?;
            let report = headless::bench(&chain, &gains, &matrix, &out)?;
            println!("{} episodes written to {}", report.records.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            chain,
            gains,
            scenario,
            system,
            seed,
            episodes,
            record,
            out,
        } => {
            let chain = headless::load_chain(chain.as_deref())?;
            let gains = headless::load_gains(gains.as_deref())?;
            let cfg = RunConfig {
                system,
                scenario: headless::load_scenario(&scenario)?,
                seed,
                episodes,
                dt: DEFAULT_DT,
                metrics: MetricsConfig::default(),
            };
            let report = headless::run_scripted(&chain, &gains, &cfg, record.as_deref())?;
            for r in &report.records {
                println!("{}", serde_json::to_string(r)?);
            }
            if let Some(dir) = out {
                report.write_dir(&dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { session } => {
            let outcomes = headless::replay(&session)?;
            let mut mismatches = 0;
            for o in &outcomes {
                let status = match &o.recorded {
                    None => "unclosed",
                    Some(_) if o.matches() => "match",
                    Some(_) => {
                        mismatches += 1;
                        "MISMATCH"
                    }
                };
                println!(
                    "episode {}: {status} (success={}, time={:.2}s, switches={}, pauses={})",
                    o.episode,
                    o.replayed.success,
                    o.replayed.completion_time,
                    o.replayed.mode_switches,
                    o.replayed.pauses
                );
            }
            Ok(if mismatches == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
