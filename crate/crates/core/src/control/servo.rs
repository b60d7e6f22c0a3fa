use nalgebra::{Rotation3, Vector3};

use super::pid::{ScalarPid, VectorPid};
use crate::error::{Error, Result};

/// Angular velocity driving `current` toward `goal`, clamped to `w_max`.
///
/// The error is the base-frame rotation vector of `goal * current⁻¹`. A zero
/// error returns zero and clears the integrator.
pub fn orientation_servo(
    current: &Rotation3<f64>,
    goal: &Rotation3<f64>,
    pid: &mut VectorPid,
    w_max: f64,
    dt: f64,
) -> Result<Vector3<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let err = (goal * current.inverse()).scaled_axis();
    if err == Vector3::zeros() {
        pid.reset();
        return Ok(Vector3::zeros());
    }
    let mut w = pid.update(err, dt);
    let n = w.norm();
    if n > w_max {
        w *= w_max / n;
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignInput {
    /// `x2 · z_b`.
    pub err: f64,
    /// `y2 · z_b`, the rate of change of `err` per unit roll about `z1`.
    pub plant_gain: f64,
    /// Operator roll rate, `u_tw · k_roll`.
    pub theta_rate: f64,
    pub theta_align: f64,
    /// `theta_align` could not be solved (`z1` vertical).
    pub degenerate: bool,
    /// Feedback active. Off in rotation mode, where the orientation servo owns the wrist.
    pub feedback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint7Command {
    /// Commanded roll rate about `z1` [rad/s].
    pub roll_rate: f64,
    pub theta_align: f64,
}

/// Joint-7 servo holding `x2` horizontal.
///
/// `theta_align` integrates the operator roll rate while the gripper rolls the
/// opposite way, so `x2` stays put in the world and only the gripper turns.
pub fn joint7_alignment_pid(input: &AlignInput, pid: &mut ScalarPid, dt: f64) -> Result<Joint7Command> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let theta_align = input.theta_align + input.theta_rate * dt;
    let feedforward = -input.theta_rate;
    let roll_rate = if input.degenerate || !input.feedback {
        pid.reset();
        feedforward
    } else {
        let sign = if input.plant_gain < 0.0 { -1.0 } else { 1.0 };
        feedforward - sign * pid.update(input.err, dt)
    };
    Ok(Joint7Command {
        roll_rate,
        theta_align,
    })
}
