use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::agent::{InputReplay, Observation, Operator};
use super::scenario::{ScenarioTracker, TaskScenario};
use super::world::{EventLog, StepReport, World};
use crate::control::{ControlSystem, GainConfig, JoystickSample, Mode};
use crate::error::Result;
use crate::kinematics::KinematicChain;
use crate::metrics::{count_mode_switches, detect_sample_pauses, MetricsConfig, MetricsRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub q: Vec<f64>,
    pub ee_position: Vector3<f64>,
    pub mode: Mode,
}

/// Everything needed to reproduce one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub system: ControlSystem,
    pub scenario: TaskScenario,
    pub seed: u64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub metrics: MetricsRecord,
    pub q0: Vec<f64>,
    /// Operator samples, one per tick, as fed to the world.
    pub inputs: Vec<JoystickSample>,
    pub trajectory: Vec<TrajectorySample>,
    pub events: EventLog,
}

/// Observation of `world` for an operator.
pub fn observe(world: &World, tracker: &ScenarioTracker) -> Observation {
    Observation {
        time: world.time(),
        ee: *world.ee_pose(),
        wrist: world.wrist_center(),
        frame2: world.frame2(),
        frame3: world.frame3(),
        system: world.system(),
        mode: world.mode(),
        progress: tracker.progress(),
        door_angle: tracker.door_angle(),
    }
}

/// Metrics of a finished run from its logs.
pub fn episode_metrics(
    spec: &EpisodeSpec,
    inputs: &[JoystickSample],
    events: &EventLog,
    success: bool,
    completion_time: f64,
    cfg: &MetricsConfig,
) -> Result<MetricsRecord> {
    Ok(MetricsRecord {
        system: spec.system,
        scenario: spec.scenario.name.clone(),
        seed: spec.seed,
        success,
        completion_time,
        mode_switches: count_mode_switches(&events.mode_switches)?,
        pauses: detect_sample_pauses(inputs, spec.dt, cfg),
        phase_timestamps: events.mode_switches.iter().map(|e| e.time).collect(),
        input_log: None,
        trajectory_log: None,
    })
}

/// One episode stepped tick by tick, for agents, replays and live sessions.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    spec: EpisodeSpec,
    cfg: MetricsConfig,
    world: World,
    tracker: ScenarioTracker,
    q0: Vec<f64>,
    inputs: Vec<JoystickSample>,
    trajectory: Vec<TrajectorySample>,
    budget: u64,
}

impl EpisodeRunner {
    pub fn new(chain: &KinematicChain, gains: &GainConfig, spec: &EpisodeSpec, cfg: &MetricsConfig) -> Result<Self> {
        let q0 = spec.scenario.sample_start(chain, spec.seed);
        let world = World::new(chain.clone(), gains.clone(), spec.system, q0.clone(), spec.dt)?;
        let tracker = ScenarioTracker::new(&spec.scenario, world.ee_pose());
        Ok(Self {
            spec: spec.clone(),
            cfg: *cfg,
            world,
            tracker,
            q0,
            inputs: Vec::new(),
            trajectory: Vec::new(),
            budget: step_budget(spec),
        })
    }

    /// Ends the episode after `steps` ticks at most.
    pub fn limit_steps(&mut self, steps: u64) {
        self.budget = self.budget.min(steps);
    }

    pub fn spec(&self) -> &EpisodeSpec {
        &self.spec
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn tracker(&self) -> &ScenarioTracker {
        &self.tracker
    }

    pub fn q0(&self) -> &[f64] {
        &self.q0
    }

    pub fn inputs(&self) -> &[JoystickSample] {
        &self.inputs
    }

    pub fn observe(&self) -> Observation {
        observe(&self.world, &self.tracker)
    }

    pub fn success(&self) -> bool {
        self.tracker.progress().success
    }

    pub fn is_done(&self) -> bool {
        self.success() || self.world.steps() >= self.budget
    }

    pub fn step(&mut self, u: &JoystickSample) -> Result<StepReport> {
        let report = self.world.step(u)?;
        self.inputs.push(*u);
        self.tracker.update(self.world.ee_pose());
        self.trajectory.push(TrajectorySample {
            time: self.world.time(),
            q: self.world.q().to_vec(),
            ee_position: self.world.ee_pose().position,
            mode: self.world.mode(),
        });
        Ok(report)
    }

    /// Metrics for the ticks run so far.
    pub fn metrics(&self) -> Result<MetricsRecord> {
        episode_metrics(
            &self.spec,
            &self.inputs,
            self.world.events(),
            self.success(),
            self.world.time(),
            &self.cfg,
        )
    }

    pub fn finish(self) -> Result<Episode> {
        Ok(Episode {
            metrics: self.metrics()?,
            events: self.world.events().clone(),
            q0: self.q0,
            inputs: self.inputs,
            trajectory: self.trajectory,
        })
    }
}

fn run(
    chain: &KinematicChain,
    gains: &GainConfig,
    spec: &EpisodeSpec,
    operator: &mut dyn Operator,
    max_steps: u64,
    cfg: &MetricsConfig,
) -> Result<Episode> {
    let mut runner = EpisodeRunner::new(chain, gains, spec, cfg)?;
    runner.limit_steps(max_steps);
    while !runner.is_done() {
        let u = operator.act(&runner.observe());
        runner.step(&u)?;
    }
    runner.finish()
}

fn step_budget(spec: &EpisodeSpec) -> u64 {
    (spec.scenario.max_time / spec.dt).ceil() as u64
}

/// Runs until success or the scenario's time limit.
pub fn run_episode(
    chain: &KinematicChain,
    gains: &GainConfig,
    spec: &EpisodeSpec,
    operator: &mut dyn Operator,
    cfg: &MetricsConfig,
) -> Result<Episode> {
    run(chain, gains, spec, operator, step_budget(spec), cfg)
}

/// Re-runs a recorded input log; stops at success or when the log runs out.
pub fn replay_episode(
    chain: &KinematicChain,
    gains: &GainConfig,
    spec: &EpisodeSpec,
    inputs: &[JoystickSample],
    cfg: &MetricsConfig,
) -> Result<Episode> {
    let budget = step_budget(spec).min(inputs.len() as u64);
    run(chain, gains, spec, &mut InputReplay::new(inputs.to_vec()), budget, cfg)
}
