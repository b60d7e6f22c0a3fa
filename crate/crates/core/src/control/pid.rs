use std::ops::{Add, Mul, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the magnitude of the integrated error.
    #[serde(default = "default_integral_limit")]
    pub integral_limit: f64,
}

fn default_integral_limit() -> f64 {
    0.5
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral_limit: 0.5,
        }
    }

    pub const fn proportional(kp: f64) -> Self {
        Self::new(kp, 0.0, 0.0)
    }

    pub(crate) fn is_valid(&self) -> bool {
        [self.kp, self.ki, self.kd, self.integral_limit]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Error signals a [`Pid`] can act on.
pub trait PidSignal:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl PidSignal for f64 {
    fn zero() -> Self {
        0.0
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl PidSignal for Vector3<f64> {
    fn zero() -> Self {
        Vector3::zeros()
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// PID on the error signal. The derivative uses the backward difference of
/// the error and is skipped on the first update after a reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid<T: PidSignal> {
    gains: PidGains,
    integral: T,
    prev_error: Option<T>,
}

impl<T: PidSignal> Pid<T> {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: T::zero(),
            prev_error: None,
        }
    }

    pub fn gains(&self) -> &PidGains {
        &self.gains
    }

    pub fn integral(&self) -> T {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = T::zero();
        self.prev_error = None;
    }

    pub fn update(&mut self, error: T, dt: f64) -> T {
        debug_assert!(dt > 0.0);
        self.integral = self.integral + error * dt;
        let mag = self.integral.magnitude();
        if mag > self.gains.integral_limit {
            self.integral = self.integral * (self.gains.integral_limit / mag);
        }
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) * (1.0 / dt),
            None => T::zero(),
        };
        self.prev_error = Some(error);
        error * self.gains.kp + self.integral * self.gains.ki + derivative * self.gains.kd
    }
}

pub type ScalarPid = Pid<f64>;
pub type VectorPid = Pid<Vector3<f64>>;
