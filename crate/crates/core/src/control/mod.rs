//! Operator input, the mode state machine and the three control systems.

mod commands;
mod gains;
mod pid;
mod servo;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

pub use commands::{
    cartesian_command, pilot_command, png_rotation_goal, png_translation_command, PngTranslation,
};
pub use gains::{GainConfig, GAINS_FORMAT_VERSION};
pub use pid::{Pid, PidGains, PidSignal, ScalarPid, VectorPid};
pub use servo::{joint7_alignment_pid, orientation_servo, AlignInput, Joint7Command};

use crate::error::{Error, Result};
use crate::frames::{build_control_frame, build_frame3, solve_theta_align, upright_theta_align, ControlFrame2};
use crate::kinematics::Pose;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Buttons {
    #[serde(default)]
    pub mode_switch: bool,
    #[serde(default)]
    pub gripper_open: bool,
    #[serde(default)]
    pub gripper_close: bool,
}

/// One sample of the 3-axis joystick.
///
/// `u_fb > 0` is a forward tilt, `u_lr > 0` a right tilt, `u_tw > 0` a
/// counter-clockwise twist.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JoystickSample {
    pub u_fb: f64,
    pub u_lr: f64,
    pub u_tw: f64,
    #[serde(default)]
    pub buttons: Buttons,
    #[serde(default)]
    pub timestamp: f64,
}

impl JoystickSample {
    pub fn neutral(timestamp: f64) -> Self {
        Self {
            timestamp,
            ..Self::default()
        }
    }

    pub fn axes(u_fb: f64, u_lr: f64, u_tw: f64) -> Self {
        Self {
            u_fb,
            u_lr,
            u_tw,
            ..Self::default()
        }
    }

    pub fn with_buttons(mut self, buttons: Buttons) -> Self {
        self.buttons = buttons;
        self
    }

    pub fn at(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn axis_values(&self) -> [f64; 3] {
        [self.u_fb, self.u_lr, self.u_tw]
    }

    pub fn is_finite(&self) -> bool {
        self.axis_values().iter().all(|v| v.is_finite()) && self.timestamp.is_finite()
    }

    /// Axes clamped to `[-1, 1]`. NaN passes through so the caller can reject it.
    pub fn clamped(&self) -> Self {
        let c = |v: f64| if v.is_nan() { v } else { v.clamp(-1.0, 1.0) };
        Self {
            u_fb: c(self.u_fb),
            u_lr: c(self.u_lr),
            u_tw: c(self.u_tw),
            ..*self
        }
    }

    /// Clamped sample with every axis below `eps` in magnitude zeroed.
    pub fn with_deadband(&self, eps: f64) -> Self {
        let d = |v: f64| if v.abs() < eps { 0.0 } else { v };
        let s = self.clamped();
        Self {
            u_fb: d(s.u_fb),
            u_lr: d(s.u_lr),
            u_tw: d(s.u_tw),
            ..s
        }
    }

    /// True when every axis is inside the deadband.
    pub fn is_idle(&self, eps: f64) -> bool {
        self.axis_values().iter().all(|v| v.abs() < eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlSystem {
    #[serde(rename = "png")]
    PointAndGo,
    Cartesian,
    Pilot,
}

impl ControlSystem {
    pub const ALL: [ControlSystem; 3] = [Self::PointAndGo, Self::Cartesian, Self::Pilot];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PointAndGo => "png",
            Self::Cartesian => "cartesian",
            Self::Pilot => "pilot",
        }
    }
}

impl fmt::Display for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png" | "pointandgo" | "point-and-go" => Ok(Self::PointAndGo),
            "cartesian" => Ok(Self::Cartesian),
            "pilot" => Ok(Self::Pilot),
            other => Err(Error::InvalidInput(format!("unknown control system '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Translation,
    Rotation,
}

impl Mode {
    pub fn toggled(self) -> Self {
        match self {
            Self::Translation => Self::Rotation,
            Self::Rotation => Self::Translation,
        }
    }
}

/// Pose and frame 2 captured when rotation mode is entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationHome {
    pub pose: Pose,
    pub frame2: ControlFrame2,
    /// `theta_align` at capture; later twist input rolls the goal by the difference.
    pub theta_align: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSwitchEvent {
    pub time: f64,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub system: ControlSystem,
    pub mode: Mode,
    /// Present iff `mode == Rotation`.
    pub home: Option<RotationHome>,
    pub theta_align: f64,
    pub z3_last: Option<Vector3<f64>>,
    pub mode_entry_time: f64,
}

impl ModeState {
    /// Translation-mode state with `theta_align` on the upright branch for `ee_orientation`.
    pub fn new(system: ControlSystem, ee_orientation: &Rotation3<f64>, time: f64) -> Result<Self> {
        let theta = upright_theta_align(ee_orientation)?.theta;
        let f2 = build_control_frame(ee_orientation, theta)?;
        let f3 = build_frame3(&f2, None);
        Ok(Self {
            system,
            mode: Mode::Translation,
            home: None,
            theta_align: theta,
            z3_last: f3.usable.then_some(f3.z3),
            mode_entry_time: time,
        })
    }

    pub fn home_pose(&self) -> Option<&Pose> {
        self.home.as_ref().map(|h| &h.pose)
    }

    /// Toggle translation and rotation on a mode-switch button edge.
    ///
    /// Entering rotation captures `current` as home. Leaving rotation keeps
    /// whatever orientation the arm holds now.
    pub fn switch_mode(&self, current: &Pose, time: f64) -> Result<(ModeState, ModeSwitchEvent)> {
        let mut next = self.clone();
        let sol = solve_theta_align(&current.orientation, self.theta_align)?;
        if !sol.degenerate {
            next.theta_align = sol.theta;
        }
        next.mode = self.mode.toggled();
        next.mode_entry_time = time;
        next.home = match next.mode {
            Mode::Rotation => Some(RotationHome {
                pose: *current,
                frame2: build_control_frame(&current.orientation, next.theta_align)?,
                theta_align: next.theta_align,
            }),
            Mode::Translation => None,
        };
        let event = ModeSwitchEvent {
            time,
            from: self.mode,
            to: next.mode,
        };
        Ok((next, event))
    }
}

/// Gripper aperture in `[0, 1]`, 1 = fully open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub aperture: f64,
}

impl Default for Gripper {
    fn default() -> Self {
        Self { aperture: 1.0 }
    }
}

impl Gripper {
    /// Open or close at `rate` per second while the respective button is held.
    /// Both held cancel out.
    pub fn step(&mut self, buttons: &Buttons, rate: f64, dt: f64) {
        let dir = f64::from(u8::from(buttons.gripper_open)) - f64::from(u8::from(buttons.gripper_close));
        self.aperture = (self.aperture + dir * rate * dt).clamp(0.0, 1.0);
    }
}
