//! Seeded system × scenario × trial matrices run in parallel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlSystem, GainConfig};
use crate::error::{Error, Result};
use crate::kinematics::KinematicChain;
use crate::metrics::{MetricsConfig, MetricsRecord, Report, ReportConfig};
use crate::sim::{run_episode, EpisodeSpec, ScenarioKind, ScriptedAgent, TaskScenario, DEFAULT_DT};

pub const MATRIX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchMatrix {
    pub format_version: u32,
    pub systems: Vec<ControlSystem>,
    pub scenarios: Vec<ScenarioKind>,
    /// Trials per cell. Trial `i` uses seed `base_seed + i` for every system,
    /// so systems see the same start perturbations.
    pub trials: u64,
    pub base_seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for BenchMatrix {
    fn default() -> Self {
        Self {
            format_version: MATRIX_FORMAT_VERSION,
            systems: ControlSystem::ALL.to_vec(),
            scenarios: ScenarioKind::ALL.to_vec(),
            trials: 10,
            base_seed: 2024,
            dt: DEFAULT_DT,
            metrics: MetricsConfig::default(),
        }
    }
}

impl BenchMatrix {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<matrix>".into(),
            message: e.to_string(),
        })?;
        if m.format_version != MATRIX_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "bench matrix",
                found: m.format_version,
                expected: MATRIX_FORMAT_VERSION,
            });
        }
        if m.systems.is_empty() || m.scenarios.is_empty() || m.trials == 0 {
            return Err(Error::Config("bench matrix has an empty axis".into()));
        }
        if !(m.dt > 0.0) || !(m.metrics.epsilon > 0.0) || !(m.metrics.tau > 0.0) {
            return Err(Error::Config("dt, epsilon and tau must be positive".into()));
        }
        Ok(m)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Episode specs in report order: scenario, then system, then trial.
    pub fn specs(&self) -> Vec<EpisodeSpec> {
        let mut out = Vec::new();
        for &kind in &self.scenarios {
            let scenario = TaskScenario::builtin(kind);
            for &system in &self.systems {
                for i in 0..self.trials {
                    out.push(EpisodeSpec {
                        system,
                        scenario: scenario.clone(),
                        seed: self.base_seed + i,
                        dt: self.dt,
                    });
                }
            }
        }
        out
    }
}

/// Runs every episode with the scripted agent for its system.
pub fn run_specs(
    chain: &KinematicChain,
    gains: &GainConfig,
    specs: &[EpisodeSpec],
    cfg: &MetricsConfig,
) -> Result<Vec<MetricsRecord>> {
    specs
        .par_iter()
        .map(|spec| {
            let mut agent = ScriptedAgent::new(spec.system, &spec.scenario, gains);
            run_episode(chain, gains, spec, &mut agent, cfg).map(|e| e.metrics)
        })
        .collect()
}

/// Checks scenario reachability, runs the matrix and builds the report.
pub fn run_matrix(chain: &KinematicChain, gains: &GainConfig, matrix: &BenchMatrix) -> Result<Report> {
    for &kind in &matrix.scenarios {
        TaskScenario::builtin(kind).check_reachable(chain)?;
    }
    let records = run_specs(chain, gains, &matrix.specs(), &matrix.metrics)?;
    Ok(Report::new(
        ReportConfig::new(&matrix.metrics, gains.hash(), matrix.base_seed, matrix.dt),
        records,
    ))
}
