//! Completion time, mode switches and pauses, aggregated per control system
//! and task.

mod report;

use serde::{Deserialize, Serialize};

pub use report::{summarize, CellSummary, Reduction, Report, ReportConfig, Stat, Summary};

use crate::control::{ControlSystem, JoystickSample, ModeSwitchEvent};
use crate::error::{Error, Result};

/// Pause detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Axis magnitude below which the joystick counts as idle.
    pub epsilon: f64,
    /// Minimum idle duration counted as a pause [s].
    pub tau: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            tau: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub system: ControlSystem,
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    /// Time of success, or the episode length on timeout [s].
    pub completion_time: f64,
    pub mode_switches: usize,
    pub pauses: usize,
    /// Times of the mode-switch events that split the episode into phases [s].
    pub phase_timestamps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_log: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_log: Option<String>,
}

/// Number of mode toggles. Events must be in non-decreasing time order.
pub fn count_mode_switches(events: &[ModeSwitchEvent]) -> Result<usize> {
    if events.iter().any(|e| !e.time.is_finite()) {
        return Err(Error::Log("mode-switch event with non-finite time".into()));
    }
    if let Some(w) = events.windows(2).find(|w| w[1].time < w[0].time) {
        return Err(Error::Log(format!(
            "mode-switch events out of order: {} after {}",
            w[1].time, w[0].time
        )));
    }
    Ok(events.len())
}

/// Idle runs (every axis below `epsilon`) lasting at least `tau`, with active
/// input on both sides. Leading and trailing idle is not a pause.
///
/// `axes` is uniformly sampled at `dt`.
pub fn detect_pauses(axes: &[[f64; 3]], dt: f64, epsilon: f64, tau: f64) -> usize {
    // Absorbs rounding in `run · dt` so a run of exactly tau counts.
    const DURATION_SLACK: f64 = 1e-9;
    let idle = |u: &[f64; 3]| u.iter().all(|v| v.abs() < epsilon);
    let mut count = 0;
    let mut seen_active = false;
    let mut run = 0usize;
    for u in axes {
        if idle(u) {
            run += 1;
        } else {
            if seen_active && run as f64 * dt >= tau - DURATION_SLACK {
                count += 1;
            }
            seen_active = true;
            run = 0;
        }
    }
    count
}

/// [`detect_pauses`] over joystick samples.
pub fn detect_sample_pauses(samples: &[JoystickSample], dt: f64, cfg: &MetricsConfig) -> usize {
    let axes: Vec<[f64; 3]> = samples.iter().map(JoystickSample::axis_values).collect();
    detect_pauses(&axes, dt, cfg.epsilon, cfg.tau)
}
