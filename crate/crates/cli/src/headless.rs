//! Batch commands that need no network: bench matrices, scripted runs and
//! session replay.

use std::path::Path;

use anyhow::Context;
use pointgo_core::batch::{run_matrix, BenchMatrix};
use pointgo_core::control::{ControlSystem, GainConfig};
use pointgo_core::kinematics::KinematicChain;
use pointgo_core::metrics::{MetricsConfig, MetricsRecord, Report, ReportConfig};
use pointgo_core::session::{replay_session, ReplayOutcome, Session, SessionHeader, SessionRecord, SessionWriter};
use pointgo_core::sim::{run_episode, EpisodeSpec, ScenarioKind, ScriptedAgent, TaskScenario};

pub fn load_chain(path: Option<&Path>) -> anyhow::Result<KinematicChain> {
    match path {
        Some(p) => KinematicChain::from_file(p).with_context(|| format!("loading chain {}", p.display())),
        None => Ok(KinematicChain::gen3()),
    }
}

pub fn load_gains(path: Option<&Path>) -> anyhow::Result<GainConfig> {
    match path {
        Some(p) => GainConfig::from_file(p).with_context(|| format!("loading gains {}", p.display())),
        None => Ok(GainConfig::default()),
    }
}

/// A built-in scenario id, or else a scenario file path.
pub fn load_scenario(id_or_path: &str) -> anyhow::Result<TaskScenario> {
    match id_or_path.parse::<ScenarioKind>() {
        Ok(kind) => Ok(TaskScenario::builtin(kind)),
        Err(_) => TaskScenario::from_file(id_or_path)
            .with_context(|| format!("'{id_or_path}' is neither a built-in scenario nor a readable scenario file")),
    }
}

pub fn bench(
    chain: &KinematicChain,
    gains: &GainConfig,
    matrix: &BenchMatrix,
    out: &Path,
) -> anyhow::Result<Report> {
    let report = run_matrix(chain, gains, matrix)?;
    report.write_dir(out)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: ControlSystem,
    pub scenario: TaskScenario,
    pub seed: u64,
    pub episodes: u32,
    pub dt: f64,
    pub metrics: MetricsConfig,
}

/// Runs the scripted agent for `episodes` consecutive seeds, recording a
/// session log when `record` is given.
pub fn run_scripted(
    chain: &KinematicChain,
    gains: &GainConfig,
    cfg: &RunConfig,
    record: Option<&Path>,
) -> anyhow::Result<Report> {
    cfg.scenario.check_reachable(chain)?;
    let mut writer = match record {
        Some(path) => Some(SessionWriter::create(
            path,
            SessionHeader::new(cfg.system, &cfg.scenario, chain, gains, cfg.dt, cfg.metrics),
        )?),
        None => None,
    };
    let mut records: Vec<MetricsRecord> = Vec::new();
    for episode in 0..cfg.episodes {
        let seed = cfg.seed + u64::from(episode);
        let spec = EpisodeSpec {
            system: cfg.system,
            scenario: cfg.scenario.clone(),
            seed,
            dt: cfg.dt,
        };
        let mut agent = ScriptedAgent::new(cfg.system, &cfg.scenario, gains);
        let ep = run_episode(chain, gains, &spec, &mut agent, &cfg.metrics)?;
        if let Some(w) = &mut writer {
            w.write(&SessionRecord::EpisodeStart {
                episode,
                seed,
                q0: ep.q0.clone(),
                system: None,
                scenario: None,
            })?;
            for (tick, sample) in ep.inputs.iter().enumerate() {
                w.write(&SessionRecord::Input {
                    episode,
                    tick: tick as u64,
                    sample: *sample,
                })?;
            }
            w.write(&SessionRecord::EpisodeEnd {
                episode,
                metrics: ep.metrics.clone(),
            })?;
        }
        records.push(ep.metrics);
    }
    Ok(Report::new(
        ReportConfig::new(&cfg.metrics, gains.hash(), cfg.seed, cfg.dt),
        records,
    ))
}

pub fn replay(path: &Path) -> anyhow::Result<Vec<ReplayOutcome>> {
    let session = Session::from_file(path)?;
    Ok(replay_session(&session)?)
}
