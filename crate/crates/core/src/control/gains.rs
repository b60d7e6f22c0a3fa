use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pid::PidGains;
use crate::error::{Error, Result};

pub const GAINS_FORMAT_VERSION: u32 = 1;

/// Operator-to-robot mapping gains, servo gains and shared limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    /// Forward/back translation speed at full deflection [m/s].
    pub k_t: f64,
    /// Vertical translation speed at full deflection [m/s].
    pub k_z: f64,
    /// Sweep and Cartesian/pilot rotation rate at full deflection [rad/s].
    pub k_s: f64,
    /// Rotation-mode roll rate from the twist axis [rad/s].
    pub k_roll: f64,
    /// Maximum angular displacement from the home pose in rotation mode [rad].
    pub alpha: f64,
    /// Joint-7 servo keeping `x2` horizontal.
    pub align_pid: PidGains,
    /// Orientation servo for the rotation-mode goal.
    pub orientation_pid: PidGains,
    /// Axis deadband applied before command generation.
    pub deadband: f64,
    /// End-effector linear speed cap shared by all control systems [m/s].
    pub v_max: f64,
    /// End-effector angular speed cap [rad/s].
    pub w_max: f64,
    /// DLS damping.
    pub damping: f64,
    /// Gripper aperture change per second while a gripper button is held.
    pub gripper_rate: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            k_t: 0.15,
            k_z: 0.12,
            k_s: 0.6,
            k_roll: 0.6,
            alpha: 45f64.to_radians(),
            align_pid: PidGains::new(10.0, 0.0, 0.1),
            orientation_pid: PidGains::new(4.0, 0.0, 0.2),
            deadband: 0.05,
            v_max: 0.2,
            w_max: 0.8,
            damping: crate::kinematics::DEFAULT_DAMPING,
            gripper_rate: 1.0,
        }
    }
}

impl GainConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("k_t", self.k_t),
            ("k_z", self.k_z),
            ("k_s", self.k_s),
            ("k_roll", self.k_roll),
            ("deadband", self.deadband),
            ("gripper_rate", self.gripper_rate),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        for (name, v) in [("v_max", self.v_max), ("w_max", self.w_max), ("damping", self.damping)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "alpha must be in (0, π/2], got {}",
                self.alpha
            )));
        }
        if self.deadband >= 1.0 {
            return Err(Error::Config("deadband must be below 1".into()));
        }
        if !self.align_pid.is_valid() || !self.orientation_pid.is_valid() {
            return Err(Error::Config("PID gains must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: "<gains>".into(),
            message,
        };
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let version = table
            .remove("format_version")
            .and_then(|v| v.as_integer())
            .ok_or_else(|| parse_err("missing integer format_version".into()))?;
        if version != i64::from(GAINS_FORMAT_VERSION) {
            return Err(Error::FormatVersion {
                what: "gains file",
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: GAINS_FORMAT_VERSION,
            });
        }
        let gains: GainConfig = table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        gains.validate()?;
        Ok(gains)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let body = toml::to_string(self).expect("gains serialize");
        format!("format_version = {GAINS_FORMAT_VERSION}\n{body}")
    }

    /// SHA-256 over the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }
}
