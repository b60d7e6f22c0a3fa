use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{
    cartesian_command, joint7_alignment_pid, orientation_servo, pilot_command, png_rotation_goal,
    png_translation_command, AlignInput, Buttons, ControlSystem, GainConfig, Gripper, JoystickSample,
    Mode, ModeState, ModeSwitchEvent, ScalarPid, VectorPid,
};
use crate::error::{Error, Result};
use crate::frames::{
    build_control_frame, build_frame3, horizontal_error, solve_theta_align, ControlFrame2, ControlFrame3,
};
use crate::kinematics::{
    clamp_ee_speed, forward_kinematics, limit_joint_velocities, resolve_twist, resolve_twist_locked,
    saturated_joints, KinematicChain, Pose, Twist,
};

pub const DEFAULT_DT: f64 = 0.01;

/// Proportional pull [1/s] back to the EE position captured on entering rotation mode.
pub const POSITION_HOLD_GAIN: f64 = 2.0;

/// Pull [1/s] of the Point-and-Go translation-mode tracking loop toward the
/// integrated wrist position and approach direction.
pub const TRACKING_GAIN: f64 = 5.0;

/// Tracking references further than this are dropped and re-seeded [m or rad].
const TRACKING_RESET: f64 = 0.05;

/// Wrist position and `z1` obtained by integrating the commanded twist exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrackingRef {
    wrist: Vector3<f64>,
    z1: Vector3<f64>,
}

/// Forward input arrived while frame 3 had no usable `z3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyEvent {
    pub time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub mode_switches: Vec<ModeSwitchEvent>,
    pub degeneracies: Vec<DegeneracyEvent>,
}

/// What one tick did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Sim time after the step.
    pub time: f64,
    /// Commanded EE twist after the speed clamp.
    pub twist: Twist,
    pub residual: f64,
    pub switched: Option<ModeSwitchEvent>,
}

#[derive(Debug, Clone)]
struct Kinematic {
    ee: Pose,
    wrist: Vector3<f64>,
    /// Axis of the last joint in base coordinates.
    last_axis: Vector3<f64>,
}

impl Kinematic {
    fn compute(chain: &KinematicChain, q: &[f64]) -> Result<Self> {
        let fk = forward_kinematics(chain, q)?;
        let wrist = chain
            .wrist_center_link()
            .map(|l| fk.links[l].position)
            .unwrap_or(fk.ee.position);
        let last_axis = fk.links[chain.dof() - 1].z_axis();
        Ok(Self {
            ee: fk.ee,
            wrist,
            last_axis,
        })
    }
}

/// Fixed-step kinematic world driven by one control system.
#[derive(Debug, Clone)]
pub struct World {
    chain: KinematicChain,
    gains: GainConfig,
    dt: f64,
    q: Vec<f64>,
    qdot: Vec<f64>,
    steps: u64,
    mode: ModeState,
    gripper: Gripper,
    align_pid: ScalarPid,
    orient_pid: VectorPid,
    prev_buttons: Buttons,
    hold_position: Option<Vector3<f64>>,
    tracking: Option<TrackingRef>,
    kin: Kinematic,
    log: EventLog,
}

impl World {
    pub fn new(
        chain: KinematicChain,
        gains: GainConfig,
        system: ControlSystem,
        q0: Vec<f64>,
        dt: f64,
    ) -> Result<Self> {
        gains.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        if q0.len() != chain.dof() {
            return Err(Error::DimensionMismatch {
                expected: chain.dof(),
                got: q0.len(),
            });
        }
        if !chain.within_limits(&q0) {
            return Err(Error::InvalidInput("start configuration violates joint limits".into()));
        }
        if system == ControlSystem::PointAndGo && chain.wrist_center_link().is_none() {
            return Err(Error::Config(
                "Point-and-Go needs a chain with a wrist center link".into(),
            ));
        }
        let kin = Kinematic::compute(&chain, &q0)?;
        let mode = ModeState::new(system, &kin.ee.orientation, 0.0)?;
        Ok(Self {
            align_pid: ScalarPid::new(gains.align_pid),
            orient_pid: VectorPid::new(gains.orientation_pid),
            qdot: vec![0.0; q0.len()],
            q: q0,
            chain,
            gains,
            dt,
            steps: 0,
            mode,
            gripper: Gripper::default(),
            prev_buttons: Buttons::default(),
            hold_position: None,
            tracking: None,
            kin,
            log: EventLog::default(),
        })
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn gains(&self) -> &GainConfig {
        &self.gains
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn qdot(&self) -> &[f64] {
        &self.qdot
    }

    pub fn mode_state(&self) -> &ModeState {
        &self.mode
    }

    pub fn system(&self) -> ControlSystem {
        self.mode.system
    }

    pub fn mode(&self) -> Mode {
        self.mode.mode
    }

    pub fn gripper(&self) -> f64 {
        self.gripper.aperture
    }

    pub fn ee_pose(&self) -> &Pose {
        &self.kin.ee
    }

    pub fn wrist_center(&self) -> Vector3<f64> {
        self.kin.wrist
    }

    pub fn events(&self) -> &EventLog {
        &self.log
    }

    /// Overrides `theta_align`, leaving `x2` off horizontal until the joint-7 servo recovers.
    pub fn set_theta_align(&mut self, theta: f64) {
        self.mode.theta_align = theta;
        self.align_pid.reset();
    }

    /// Frame 2 for the current orientation and `theta_align`.
    pub fn frame2(&self) -> ControlFrame2 {
        build_control_frame(&self.kin.ee.orientation, self.mode.theta_align)
            .expect("FK orientation is a rotation")
    }

    /// Frame 3 as the controller would build it now.
    pub fn frame3(&self) -> ControlFrame3 {
        build_frame3(&self.frame2(), self.mode.z3_last)
    }

    fn dump(&self, u: &JoystickSample) -> String {
        format!(
            "q = {:?}\nqdot = {:?}\nmode = {:?}\ntheta_align = {}\ninput = {:?}",
            self.q, self.qdot, self.mode.mode, self.mode.theta_align, u
        )
    }

    fn non_finite(&self, stage: &'static str, u: &JoystickSample) -> Error {
        Error::NonFinite {
            stage,
            time: self.time(),
            dump: self.dump(u),
        }
    }

    /// Advance one tick.
    pub fn step(&mut self, raw: &JoystickSample) -> Result<StepReport> {
        let u = raw.with_deadband(self.gains.deadband);
        if !u.axis_values().iter().all(|v| v.is_finite()) {
            return Err(self.non_finite("input", raw));
        }
        let t = self.time();
        let dt = self.dt;

        let mut switched = None;
        if u.buttons.mode_switch && !self.prev_buttons.mode_switch {
            let (next, ev) = self.mode.switch_mode(&self.kin.ee, t)?;
            self.mode = next;
            self.align_pid.reset();
            self.orient_pid.reset();
            self.hold_position = (self.mode.mode == Mode::Rotation).then_some(self.kin.ee.position);
            self.log.mode_switches.push(ev);
            switched = Some(ev);
        }
        self.prev_buttons = u.buttons;
        self.gripper.step(&u.buttons, self.gains.gripper_rate, dt);

        let (twist, roll_rate) = self.command(&u, t)?;
        let mut twist = clamp_ee_speed(&twist, self.gains.v_max, self.gains.w_max);
        if self.mode.system == ControlSystem::PointAndGo && self.mode.mode == Mode::Translation {
            twist = clamp_ee_speed(&self.track(&twist), self.gains.v_max, self.gains.w_max);
        } else {
            self.tracking = None;
        }
        if !twist.is_finite() {
            return Err(self.non_finite("command", &u));
        }

        let mut res = resolve_twist(&self.chain, &self.q, &twist, self.gains.damping)?;
        let mut qdot = self.with_roll(&res.qdot, roll_rate);
        let locked = saturated_joints(&self.chain, &self.q, &qdot);
        if locked.iter().any(|l| *l) {
            res = resolve_twist_locked(&self.chain, &self.q, &twist, self.gains.damping, &locked)?;
            qdot = self.with_roll(&res.qdot, roll_rate);
            for (v, l) in qdot.iter_mut().zip(&locked) {
                if *l {
                    *v = 0.0;
                }
            }
        }
        limit_joint_velocities(&self.chain, &mut qdot);
        if qdot.iter().any(|v| !v.is_finite()) {
            return Err(self.non_finite("joint velocity", &u));
        }

        for (qi, vi) in self.q.iter_mut().zip(&qdot) {
            *qi += vi * dt;
        }
        self.chain.clamp_to_limits(&mut self.q);
        self.qdot = qdot;
        self.steps += 1;
        self.kin = Kinematic::compute(&self.chain, &self.q)?;

        Ok(StepReport {
            time: self.time(),
            twist,
            residual: res.residual,
            switched,
        })
    }

    /// Joint rates with the roll channel added on the last joint.
    fn with_roll(&self, qdot: &nalgebra::DVector<f64>, roll_rate: f64) -> Vec<f64> {
        let mut qdot: Vec<f64> = qdot.iter().copied().collect();
        if roll_rate != 0.0 {
            let z1 = self.kin.ee.z_axis();
            let s = self.kin.last_axis.dot(&z1);
            // Only a last joint coaxial with z1 rolls the gripper.
            if s.abs() > 0.5 {
                *qdot.last_mut().expect("dof >= 2") += roll_rate / s;
            }
        }
        qdot
    }

    /// Adds the tracking correction to `feedforward` and advances the references.
    ///
    /// Explicit Euler and DLS damping both leak a little of every sweep into
    /// wrist motion and elevation change; this loop pulls them back.
    fn track(&mut self, feedforward: &Twist) -> Twist {
        let p_ee = self.kin.ee.position;
        let p_w = self.kin.wrist;
        let z1 = self.kin.ee.z_axis();
        let r = match self.tracking {
            Some(r) if (r.wrist - p_w).norm() < TRACKING_RESET && z1.angle(&r.z1) < TRACKING_RESET => r,
            _ => TrackingRef { wrist: p_w, z1 },
        };
        let w_corr = z1.cross(&r.z1) * TRACKING_GAIN;
        let v_corr = (r.wrist - p_w) * TRACKING_GAIN + w_corr.cross(&(p_ee - p_w));
        let v_wrist = feedforward.linear + feedforward.angular.cross(&(p_w - p_ee));
        self.tracking = Some(TrackingRef {
            wrist: r.wrist + v_wrist * self.dt,
            z1: Rotation3::new(feedforward.angular * self.dt) * r.z1,
        });
        Twist::new(feedforward.linear + v_corr, feedforward.angular + w_corr)
    }

    /// EE twist plus roll rate about `z1` for the joint-7 channel.
    fn command(&mut self, u: &JoystickSample, t: f64) -> Result<(Twist, f64)> {
        let g = &self.gains;
        let r1 = self.kin.ee.orientation;
        let hold = self
            .hold_position
            .map(|p| (p - self.kin.ee.position) * POSITION_HOLD_GAIN)
            .unwrap_or_else(Vector3::zeros);
        match (self.mode.system, self.mode.mode) {
            (ControlSystem::PointAndGo, Mode::Translation) => {
                let f2 = build_control_frame(&r1, self.mode.theta_align)?;
                let f3 = build_frame3(&f2, self.mode.z3_last);
                if f3.usable {
                    self.mode.z3_last = Some(f3.z3);
                }
                let cmd = png_translation_command(u, &f3, &self.kin.ee.position, &self.kin.wrist, g);
                if cmd.forward_suppressed {
                    self.log.degeneracies.push(DegeneracyEvent { time: t });
                }
                let degenerate = solve_theta_align(&r1, self.mode.theta_align)?.degenerate;
                let j7 = joint7_alignment_pid(
                    &AlignInput {
                        err: horizontal_error(&f2),
                        plant_gain: f2.y2.z,
                        theta_rate: 0.0,
                        theta_align: self.mode.theta_align,
                        degenerate,
                        feedback: true,
                    },
                    &mut self.align_pid,
                    self.dt,
                )?;
                Ok((cmd.twist, j7.roll_rate))
            }
            (ControlSystem::PointAndGo, Mode::Rotation) => {
                let home = self.mode.home.as_ref().expect("home present in rotation mode");
                let j7 = joint7_alignment_pid(
                    &AlignInput {
                        err: 0.0,
                        plant_gain: 0.0,
                        theta_rate: u.u_tw * g.k_roll,
                        theta_align: self.mode.theta_align,
                        degenerate: false,
                        feedback: false,
                    },
                    &mut self.align_pid,
                    self.dt,
                )?;
                // Twist rolls the goal about the home z1 by the change in theta_align.
                let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), -(j7.theta_align - home.theta_align));
                let goal = png_rotation_goal(u, home, g.alpha) * roll;
                let w = orientation_servo(&r1, &goal, &mut self.orient_pid, g.w_max, self.dt)?;
                self.mode.theta_align = j7.theta_align;
                Ok((Twist::new(hold, w), j7.roll_rate))
            }
            (ControlSystem::Cartesian, mode) => {
                let mut tw = cartesian_command(u, mode, &r1, g);
                tw.linear += hold;
                Ok((tw, 0.0))
            }
            (ControlSystem::Pilot, mode) => {
                let mut tw = pilot_command(u, mode, &r1, g);
                tw.linear += hold;
                Ok((tw, 0.0))
            }
        }
    }
}
