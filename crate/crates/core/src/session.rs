//! Newline-delimited JSON session logs: one header, then per-episode start,
//! input and end records. A log is self-contained; replaying it re-creates
//! every episode from the embedded chain, gains and scenario.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{ControlSystem, GainConfig, JoystickSample};
use crate::error::{Error, Result};
use crate::kinematics::KinematicChain;
use crate::metrics::{MetricsConfig, MetricsRecord};
use crate::sim::{replay_episode, EpisodeSpec, TaskScenario};

pub const SESSION_SCHEMA_VERSION: u32 = 1;

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema_version: u32,
    pub system: ControlSystem,
    /// Scenario, chain and gains in their TOML file forms.
    pub scenario: String,
    pub chain: String,
    pub gains: String,
    pub chain_hash: String,
    pub gains_hash: String,
    pub dt: f64,
    pub metrics: MetricsConfig,
}

impl SessionHeader {
    pub fn new(
        system: ControlSystem,
        scenario: &TaskScenario,
        chain: &KinematicChain,
        gains: &GainConfig,
        dt: f64,
        metrics: MetricsConfig,
    ) -> Self {
        let chain = chain.to_toml_string();
        Self {
            schema_version: SESSION_SCHEMA_VERSION,
            system,
            scenario: scenario.to_toml_string(),
            chain_hash: sha256_hex(&chain),
            chain,
            gains: gains.to_toml_string(),
            gains_hash: gains.hash(),
            dt,
            metrics,
        }
    }

    /// Parsed chain, gains and scenario; fails if a hash does not match.
    pub fn context(&self) -> Result<(KinematicChain, GainConfig, TaskScenario)> {
        if self.schema_version != SESSION_SCHEMA_VERSION {
            return Err(Error::FormatVersion {
                what: "session",
                found: self.schema_version,
                expected: SESSION_SCHEMA_VERSION,
            });
        }
        if sha256_hex(&self.chain) != self.chain_hash {
            return Err(Error::Log("chain hash mismatch".into()));
        }
        let gains = GainConfig::from_toml_str(&self.gains)?;
        if gains.hash() != self.gains_hash {
            return Err(Error::Log("gains hash mismatch".into()));
        }
        Ok((
            KinematicChain::from_toml_str(&self.chain)?,
            gains,
            TaskScenario::from_toml_str(&self.scenario)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionRecord {
    Header(SessionHeader),
    EpisodeStart {
        episode: u32,
        seed: u64,
        q0: Vec<f64>,
        /// Overrides the header's system for this episode.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        system: Option<ControlSystem>,
        /// Overrides the header's scenario (TOML form) for this episode.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scenario: Option<String>,
    },
    Input {
        episode: u32,
        tick: u64,
        sample: JoystickSample,
    },
    EpisodeEnd {
        episode: u32,
        metrics: MetricsRecord,
    },
}

/// Appends records to a session file; flushes at every episode boundary.
pub struct SessionWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl SessionWriter {
    pub fn create(path: impl AsRef<Path>, header: SessionHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
        };
        w.write(&SessionRecord::Header(header))?;
        Ok(w)
    }

    pub fn write(&mut self, record: &SessionRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        if !matches!(record, SessionRecord::Input { .. }) {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEpisode {
    pub episode: u32,
    pub seed: u64,
    pub q0: Vec<f64>,
    pub system: Option<ControlSystem>,
    pub scenario: Option<String>,
    pub inputs: Vec<JoystickSample>,
    /// Absent if the log ends mid-episode.
    pub metrics: Option<MetricsRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub header: SessionHeader,
    pub episodes: Vec<RecordedEpisode>,
}

impl Session {
    /// Parses a session log. Ticks must be contiguous from 0 within an episode.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut header = None;
        let mut episodes: Vec<RecordedEpisode> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Log(format!("line {}: {e}", n + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SessionRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Log(format!("line {}: {e}", n + 1)))?;
            let bad = |msg: &str| Error::Log(format!("line {}: {msg}", n + 1));
            match rec {
                SessionRecord::Header(h) => {
                    if header.is_some() {
                        return Err(bad("second header"));
                    }
                    header = Some(h);
                }
                _ if header.is_none() => return Err(bad("record before header")),
                SessionRecord::EpisodeStart {
                    episode,
                    seed,
                    q0,
                    system,
                    scenario,
                } => {
                    if episodes.last().is_some_and(|e| e.metrics.is_none()) {
                        return Err(bad("episode started before the previous one ended"));
                    }
                    episodes.push(RecordedEpisode {
                        episode,
                        seed,
                        q0,
                        system,
                        scenario,
                        inputs: Vec::new(),
                        metrics: None,
                    });
                }
                SessionRecord::Input {
                    episode,
                    tick,
                    sample,
                } => {
                    let Some(ep) = episodes.last_mut().filter(|e| e.episode == episode && e.metrics.is_none())
                    else {
                        return Err(bad("input outside its episode"));
                    };
                    if tick != ep.inputs.len() as u64 {
                        return Err(bad(&format!("expected tick {}, got {tick}", ep.inputs.len())));
                    }
                    ep.inputs.push(sample);
                }
                SessionRecord::EpisodeEnd { episode, metrics } => {
                    let Some(ep) = episodes.last_mut().filter(|e| e.episode == episode && e.metrics.is_none())
                    else {
                        return Err(bad("end of an episode that is not open"));
                    };
                    ep.metrics = Some(metrics);
                }
            }
        }
        let header = header.ok_or_else(|| Error::Log("session has no header".into()))?;
        Ok(Self { header, episodes })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub episode: u32,
    pub recorded: Option<MetricsRecord>,
    pub replayed: MetricsRecord,
}

impl ReplayOutcome {
    /// True when the episode was closed in the log and replay reproduced its metrics.
    pub fn matches(&self) -> bool {
        self.recorded.as_ref() == Some(&self.replayed)
    }
}

/// Re-runs every episode of `session` from its recorded inputs.
pub fn replay_session(session: &Session) -> Result<Vec<ReplayOutcome>> {
    let (chain, gains, default_scenario) = session.header.context()?;
    session
        .episodes
        .iter()
        .map(|ep| {
            let scenario = match &ep.scenario {
                Some(text) => TaskScenario::from_toml_str(text)?,
                None => default_scenario.clone(),
            };
            let spec = EpisodeSpec {
                system: ep.system.unwrap_or(session.header.system),
                scenario: scenario.clone(),
                seed: ep.seed,
                dt: session.header.dt,
            };
            let q0 = scenario.sample_start(&chain, ep.seed);
            if q0 != ep.q0 {
                return Err(Error::Log(format!(
                    "episode {}: start configuration does not match seed {}",
                    ep.episode, ep.seed
                )));
            }
            let replayed = replay_episode(&chain, &gains, &spec, &ep.inputs, &session.header.metrics)?;
            Ok(ReplayOutcome {
                episode: ep.episode,
                recorded: ep.metrics.clone(),
                replayed: replayed.metrics,
            })
        })
        .collect()
}
