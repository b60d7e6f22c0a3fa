//! Headless kinematic simulation: the world, task scenarios, scripted
//! operators and episode runs.

mod agent;
mod episode;
mod scenario;
mod world;

pub use agent::{AgentTuning, InputReplay, Observation, Operator, ScriptedAgent};
pub use episode::{
    episode_metrics, observe, EpisodeRunner, replay_episode, run_episode, Episode, EpisodeSpec, TrajectorySample,
};
pub use scenario::{
    arc_point, nominal_start_pose, scenario_success, Progress, ScenarioGeometry, ScenarioKind,
    ScenarioTracker, TaskScenario, HINGE_REENGAGE, SCENARIO_FORMAT_VERSION,
};
pub use world::{
    DegeneracyEvent, EventLog, StepReport, World, DEFAULT_DT, POSITION_HOLD_GAIN, TRACKING_GAIN,
};
