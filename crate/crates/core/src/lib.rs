//! Point-and-Go teleoperation for spherical-wrist arms: kinematics, control
//! frames, the three control systems, a headless simulator and task metrics.

pub mod batch;
pub mod control;
pub mod error;
pub mod frames;
pub mod kinematics;
pub mod metrics;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
