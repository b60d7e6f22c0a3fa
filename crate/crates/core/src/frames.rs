//! Control frames derived from the end-effector orientation.
//!
//! Frame 1 is the end-effector frame `[x1, y1, z1]`. Frame 2 rotates frame 1
//! about `z1` by `theta_align` so that `x2` lies in the horizontal plane of
//! the base. Frame 3 keeps `x2`, replaces the pointing axis by its horizontal
//! projection `z3`, and completes the triad with the sweep axis `y3`.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Both `x1·z_b` and `y1·z_b` below this means `z1` is vertical.
pub const THETA_DEGENERATE_TOL: f64 = 1e-9;
/// Minimum length of the horizontal projection of `z2`.
pub const PROJECTION_DEGENERATE_TOL: f64 = 1e-6;
/// Default tolerance on `|x2·z_b|` for a settled frame.
pub const ALIGN_TOL: f64 = 1e-3;

const ORTHONORMAL_TOL: f64 = 1e-6;

fn up() -> Vector3<f64> {
    Vector3::z()
}

/// Result of [`solve_theta_align`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolution {
    pub theta: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlFrame2 {
    pub x2: Vector3<f64>,
    pub y2: Vector3<f64>,
    pub z2: Vector3<f64>,
    pub theta_align: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlFrame3 {
    pub x3: Vector3<f64>,
    pub y3: Vector3<f64>,
    pub z3: Vector3<f64>,
    /// `z2` was inside the vertical cone; `z3` is the frozen previous value.
    pub degenerate: bool,
    /// False when degenerate with no previous `z3` to fall back on. Forward
    /// translation along `z3` must be suppressed while unusable.
    pub usable: bool,
}

pub(crate) fn check_rotation(r: &Rotation3<f64>) -> Result<()> {
    let m = r.matrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("orientation has non-finite entries".into()));
    }
    let defect = (m.transpose() * m - nalgebra::Matrix3::identity()).amax();
    if defect > ORTHONORMAL_TOL || m.determinant() <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "orientation is not a proper rotation (‖RᵀR − I‖∞ = {defect:.2e})"
        )));
    }
    Ok(())
}

/// Wraps `angle` to the representative closest to `reference`.
fn nearest_representative(angle: f64, reference: f64) -> f64 {
    use std::f64::consts::TAU;
    angle + ((reference - angle) / TAU).round() * TAU
}

/// Angle about `z1` that makes `x2` horizontal:
/// `cos θ·(x1·z_b) + sin θ·(y1·z_b) = 0`.
///
/// The two solutions are π apart; the one closest to `theta_prev` wins, ties
/// go to the larger angle. The result is unwrapped around `theta_prev`. When
/// `z1` is vertical every θ works, so `theta_prev` is returned and the
/// solution is flagged degenerate.
pub fn solve_theta_align(r1: &Rotation3<f64>, theta_prev: f64) -> Result<ThetaSolution> {
    check_rotation(r1)?;
    let m = r1.matrix();
    let a = m[(2, 0)]; // x1 · z_b
    let b = m[(2, 1)]; // y1 · z_b
    if a.abs() < THETA_DEGENERATE_TOL && b.abs() < THETA_DEGENERATE_TOL {
        return Ok(ThetaSolution {
            theta: theta_prev,
            degenerate: true,
        });
    }
    let root = (-a).atan2(b);
    let lo = nearest_representative(root, theta_prev);
    // The other root is lo ± π; pick the side facing theta_prev.
    let other = if lo <= theta_prev {
        lo + std::f64::consts::PI
    } else {
        lo - std::f64::consts::PI
    };
    let (d_lo, d_other) = ((lo - theta_prev).abs(), (other - theta_prev).abs());
    let theta = if d_lo < d_other || (d_lo == d_other && lo > other) {
        lo
    } else {
        other
    };
    Ok(ThetaSolution {
        theta,
        degenerate: false,
    })
}

/// The solution whose `y2` points upward (`y2·z_b ≥ 0`). Used to pick a
/// consistent branch when there is no history.
pub fn upright_theta_align(r1: &Rotation3<f64>) -> Result<ThetaSolution> {
    let sol = solve_theta_align(r1, 0.0)?;
    if sol.degenerate {
        return Ok(sol);
    }
    let frame = build_control_frame(r1, sol.theta)?;
    if frame.y2.z < 0.0 {
        let flipped = if sol.theta > 0.0 {
            sol.theta - std::f64::consts::PI
        } else {
            sol.theta + std::f64::consts::PI
        };
        return Ok(ThetaSolution {
            theta: flipped,
            degenerate: false,
        });
    }
    Ok(sol)
}

/// `x2 = cos θ·x1 + sin θ·y1`, `z2 = z1`, `y2 = z2 × x2`.
pub fn build_control_frame(r1: &Rotation3<f64>, theta_align: f64) -> Result<ControlFrame2> {
    check_rotation(r1)?;
    if !theta_align.is_finite() {
        return Err(Error::InvalidInput("theta_align must be finite".into()));
    }
    let m = r1.matrix();
    let x1: Vector3<f64> = m.column(0).into_owned();
    let y1: Vector3<f64> = m.column(1).into_owned();
    let z1: Vector3<f64> = m.column(2).into_owned();
    let (s, c) = theta_align.sin_cos();
    let x2 = x1 * c + y1 * s;
    let z2 = z1;
    let y2 = z2.cross(&x2);
    Ok(ControlFrame2 {
        x2,
        y2,
        z2,
        theta_align,
    })
}

/// Signed height of the tip of the unit `x2` above the end-effector origin.
pub fn horizontal_error(frame: &ControlFrame2) -> f64 {
    frame.x2.dot(&up())
}

/// Projects `z2` onto the horizontal plane. Inside the vertical cone the
/// previous `z3` is kept.
pub fn build_frame3(frame: &ControlFrame2, z3_prev: Option<Vector3<f64>>) -> ControlFrame3 {
    let mut h = frame.z2 - up() * frame.z2.dot(&up());
    // Exactly horizontal by construction, not by rounding.
    h.z = 0.0;
    let norm = h.norm();
    let (z3, degenerate, usable) = if norm < PROJECTION_DEGENERATE_TOL {
        match z3_prev {
            Some(prev) => (prev, true, true),
            None => (Vector3::zeros(), true, false),
        }
    } else {
        (h / norm, false, true)
    };
    let x3 = frame.x2;
    let y3 = z3.cross(&x3);
    ControlFrame3 {
        x3,
        y3,
        z3,
        degenerate,
        usable,
    }
}
