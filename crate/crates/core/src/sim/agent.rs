use nalgebra::{Matrix2, Vector2, Vector3};

use super::scenario::{arc_point, Progress, ScenarioGeometry, TaskScenario};
use crate::control::{Buttons, ControlSystem, GainConfig, JoystickSample, Mode};
use crate::frames::{ControlFrame2, ControlFrame3};
use crate::kinematics::Pose;

/// What an operator sees each tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub ee: Pose,
    pub wrist: Vector3<f64>,
    pub frame2: ControlFrame2,
    pub frame3: ControlFrame3,
    pub system: ControlSystem,
    pub mode: Mode,
    pub progress: Progress,
    pub door_angle: Option<f64>,
}

/// Anything that turns observations into joystick samples.
pub trait Operator {
    fn act(&mut self, obs: &Observation) -> JoystickSample;
}

/// Replays a fixed input sequence, then holds neutral.
#[derive(Debug, Clone)]
pub struct InputReplay {
    inputs: Vec<JoystickSample>,
    next: usize,
}

impl InputReplay {
    pub fn new(inputs: Vec<JoystickSample>) -> Self {
        Self { inputs, next: 0 }
    }

    pub fn exhausted(&self) -> bool {
        self.next >= self.inputs.len()
    }
}

impl Operator for InputReplay {
    fn act(&mut self, obs: &Observation) -> JoystickSample {
        let s = self
            .inputs
            .get(self.next)
            .copied()
            .unwrap_or_else(|| JoystickSample::neutral(obs.time));
        self.next += 1;
        s
    }
}

/// Tolerances and gains of the scripted operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentTuning {
    /// Proportional gain on position errors [1/s].
    pub position_gain: f64,
    /// Proportional gain on heading and orientation errors [1/s].
    pub heading_gain: f64,
    /// Speed while following a path [m/s].
    pub path_speed: f64,
    /// Cap on position-servo speed [m/s].
    pub max_speed: f64,
    /// Heading error below which a sweep or rotation phase is done [rad].
    pub heading_tol: f64,
    /// Position error below which a positioning phase is done [m].
    pub position_tol: f64,
    /// Distance before the gate where the final approach starts [m].
    pub gate_lead: f64,
    /// Angle ahead of the door the hinge target is placed [rad].
    pub door_lead: f64,
}

impl Default for AgentTuning {
    fn default() -> Self {
        Self {
            position_gain: 2.0,
            heading_gain: 2.5,
            path_speed: 0.08,
            max_speed: 0.12,
            heading_tol: 1.0f64.to_radians(),
            position_tol: 0.012,
            gate_lead: 0.08,
            door_lead: 4.0f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    /// Point-and-Go: sweep to face a wrist target, then go there.
    ToWrist,
    /// Rotate or sweep until the approach axis matches a heading.
    Face,
    /// Baseline: translate to a point.
    Position,
    /// Follow the final path until the episode ends.
    Final,
    /// Baseline: rotation mode toward a direction.
    Rotate,
    /// Point-and-Go: rotation mode with a held deflection, fixed on the first tick.
    Tilt(Option<f64>),
    /// Pressing the mode button; the inner phase follows on the next tick.
    Press(Box<Phase>),
}

/// Phase-structured proportional operator for one control system and scenario.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    system: ControlSystem,
    geometry: ScenarioGeometry,
    gains: GainConfig,
    tuning: AgentTuning,
    phase: Phase,
}

fn horizontal(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, 0.0)
}

/// Signed angle from `from` to `to` about `+z_b`, both projected to the horizontal plane.
fn heading_error(from: &Vector3<f64>, to: &Vector3<f64>) -> f64 {
    let (a, b) = (horizontal(from), horizontal(to));
    a.cross(&b).z.atan2(a.dot(&b))
}

fn cap_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Scales all axes together so none exceeds 1.
fn saturate(u: [f64; 3]) -> JoystickSample {
    let m = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    JoystickSample::axes(u[0] / m, u[1] / m, u[2] / m)
}

fn press() -> JoystickSample {
    JoystickSample::default().with_buttons(Buttons {
        mode_switch: true,
        ..Buttons::default()
    })
}

impl ScriptedAgent {
    pub fn new(system: ControlSystem, scenario: &TaskScenario, gains: &GainConfig) -> Self {
        Self::with_tuning(system, scenario, gains, AgentTuning::default())
    }

    pub fn with_tuning(
        system: ControlSystem,
        scenario: &TaskScenario,
        gains: &GainConfig,
        tuning: AgentTuning,
    ) -> Self {
        let png = system == ControlSystem::PointAndGo;
        let phase = match (&scenario.geometry, png) {
            (ScenarioGeometry::OrientTarget { .. }, true) => Phase::Face,
            (ScenarioGeometry::OrientTarget { .. }, false) => Phase::Press(Box::new(Phase::Rotate)),
            (ScenarioGeometry::Goalpost { .. }, true) => Phase::ToWrist,
            (ScenarioGeometry::Goalpost { .. }, false) => Phase::Press(Box::new(Phase::Rotate)),
            (ScenarioGeometry::HingeArc { .. }, _) => Phase::Position,
        };
        Self {
            system,
            geometry: scenario.geometry.clone(),
            gains: gains.clone(),
            tuning,
            phase,
        }
    }

    /// Joystick sample that moves the EE tip with velocity `v` in translation mode.
    fn translate(&self, obs: &Observation, v: Vector3<f64>) -> JoystickSample {
        let g = &self.gains;
        match self.system {
            ControlSystem::Cartesian => saturate([v.x / g.k_t, v.y / g.k_t, v.z / g.k_z]),
            ControlSystem::Pilot => {
                let w = obs.ee.orientation.inverse() * v;
                saturate([w.z / g.k_t, w.x / g.k_t, w.y / g.k_z])
            }
            ControlSystem::PointAndGo => {
                // Tip velocity = u_fb·k_t·z3 + u_lr·k_s·(ŷ3 × r) horizontally, u_tw·k_z vertically.
                let f3 = &obs.frame3;
                let r = obs.ee.position - obs.wrist;
                let sweep = f3.y3.normalize().cross(&r) * g.k_s;
                let m = Matrix2::new(f3.z3.x * g.k_t, sweep.x, f3.z3.y * g.k_t, sweep.y);
                let [u_fb, u_lr] = m
                    .try_inverse()
                    .map(|inv| {
                        let s = inv * Vector2::new(v.x, v.y);
                        [s.x, s.y]
                    })
                    .unwrap_or([0.0, 0.0]);
                saturate([u_fb, u_lr, v.z / g.k_z])
            }
        }
    }

    /// Sample that sweeps `z3` toward the horizontal heading of `target`.
    fn sweep_toward(&self, obs: &Observation, target: &Vector3<f64>) -> (JoystickSample, f64) {
        let e = heading_error(&obs.frame3.z3, target);
        let y3z = obs.frame3.y3.normalize().z;
        let u_lr = if y3z.abs() > 1e-6 {
            self.tuning.heading_gain * e / (self.gains.k_s * y3z)
        } else {
            0.0
        };
        (saturate([0.0, u_lr, 0.0]), e)
    }

    /// Baseline rotation-mode sample turning `z1` toward `target`.
    fn rotate_toward(&self, obs: &Observation, target: &Vector3<f64>) -> (JoystickSample, f64) {
        let z1 = obs.ee.z_axis();
        let angle = z1.angle(target);
        let axis = z1.cross(target).try_normalize(1e-12).unwrap_or_else(Vector3::zeros);
        let w = axis * (self.tuning.heading_gain * angle);
        let u = obs.ee.orientation.inverse() * w / self.gains.k_s;
        (saturate([u.x, u.y, u.z]), angle)
    }

    fn position_servo(&self, p: &Vector3<f64>, target: &Vector3<f64>) -> Vector3<f64> {
        cap_norm((target - p) * self.tuning.position_gain, self.tuning.max_speed)
    }

    fn orient_target(&mut self, obs: &Observation, d: &Vector3<f64>) -> JoystickSample {
        match self.phase {
            Phase::Face => {
                let (u, e) = self.sweep_toward(obs, d);
                if e.abs() < self.tuning.heading_tol * 0.75 {
                    self.phase = Phase::Press(Box::new(Phase::Tilt(None)));
                }
                u
            }
            Phase::Tilt(None) => {
                // Home was captured on the press tick: pitching by a about x2
                // lowers z2 by a when y2 points up.
                let el0 = obs.ee.z_axis().z.clamp(-1.0, 1.0).asin();
                let el_t = d.z.clamp(-1.0, 1.0).asin();
                let sign = if obs.frame2.y2.z < 0.0 { -1.0 } else { 1.0 };
                let u_fb = (sign * (el0 - el_t) / self.gains.alpha).clamp(-1.0, 1.0);
                self.phase = Phase::Tilt(Some(u_fb));
                JoystickSample::axes(u_fb, 0.0, 0.0)
            }
            Phase::Tilt(Some(u_fb)) => JoystickSample::axes(u_fb, 0.0, 0.0),
            Phase::Rotate => self.rotate_toward(obs, d).0,
            _ => JoystickSample::default(),
        }
    }

    fn goalpost(&mut self, obs: &Observation, c: &Vector3<f64>, a: &Vector3<f64>) -> JoystickSample {
        let t = self.tuning;
        let p = obs.ee.position;
        let a_h = horizontal(a).try_normalize(1e-9).unwrap_or(*a);
        let pre = c - a_h * t.gate_lead;
        match self.phase {
            Phase::ToWrist => {
                // Wrist spot from which a pure sweep puts the tip at `pre`.
                let r = p - obs.wrist;
                let target = pre - a_h * horizontal(&r).norm() - Vector3::z() * r.z;
                let d = target - obs.wrist;
                let d_h = horizontal(&d);
                if d_h.norm() < 2.0 * t.position_tol && d.z.abs() < t.position_tol {
                    self.phase = Phase::Face;
                    return self.goalpost(obs, c, a);
                }
                let (sweep, e) = self.sweep_toward(obs, &d_h);
                let go = if e.abs() < 10f64.to_radians() {
                    (t.position_gain * d_h.norm() * e.cos()).min(t.max_speed) / self.gains.k_t
                } else {
                    0.0
                };
                saturate([go, sweep.u_lr, t.position_gain * d.z / self.gains.k_z])
            }
            Phase::Face => {
                let (u, e) = self.sweep_toward(obs, &a_h);
                if e.abs() < t.heading_tol {
                    self.phase = Phase::Final;
                }
                u
            }
            Phase::Rotate => {
                let (u, angle) = self.rotate_toward(obs, a);
                if angle < 2.0 * t.heading_tol {
                    self.phase = Phase::Press(Box::new(Phase::Position));
                }
                u
            }
            Phase::Position => {
                if (pre - p).norm() < t.position_tol {
                    self.phase = Phase::Final;
                }
                self.translate(obs, self.position_servo(&p, &pre))
            }
            Phase::Final => {
                let rel = p - c;
                let lateral = rel - a_h * rel.dot(&a_h);
                let v = a_h * t.path_speed - lateral * t.position_gain;
                self.translate(obs, v)
            }
            _ => JoystickSample::default(),
        }
    }

    fn hinge(&mut self, obs: &Observation, hinge: &Vector3<f64>, radius: f64, start: f64) -> JoystickSample {
        let t = self.tuning;
        let p = obs.ee.position;
        match self.phase {
            Phase::Position => {
                let handle = arc_point(hinge, radius, start, 0.0);
                if (handle - p).norm() < t.position_tol {
                    self.phase = Phase::Final;
                }
                self.translate(obs, self.position_servo(&p, &handle))
            }
            _ => {
                let door = obs.door_angle.unwrap_or(0.0);
                let target = arc_point(hinge, radius, start, door + t.door_lead);
                let v = cap_norm((target - p) * t.position_gain, t.path_speed);
                self.translate(obs, v)
            }
        }
    }
}

impl Operator for ScriptedAgent {
    fn act(&mut self, obs: &Observation) -> JoystickSample {
        if let Phase::Press(then) = &self.phase {
            self.phase = (**then).clone();
            return press().at(obs.time);
        }
        let geometry = self.geometry.clone();
        let u = match &geometry {
            ScenarioGeometry::OrientTarget { direction, .. } => self.orient_target(obs, direction),
            ScenarioGeometry::Goalpost { center, approach, .. } => self.goalpost(obs, center, approach),
            ScenarioGeometry::HingeArc {
                hinge,
                radius,
                start_angle,
                ..
            } => self.hinge(obs, hinge, *radius, *start_angle),
        };
        u.at(obs.time)
    }
}
