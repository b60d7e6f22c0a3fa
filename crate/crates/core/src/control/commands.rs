use nalgebra::{Rotation3, Vector3};

use super::{GainConfig, JoystickSample, Mode, RotationHome};
use crate::frames::ControlFrame3;
use crate::kinematics::Twist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PngTranslation {
    pub twist: Twist,
    /// Forward input was dropped because frame 3 had no usable `z3`.
    pub forward_suppressed: bool,
}

/// Point-and-Go translation mode: go along `z3`, rise along `z_b`, sweep
/// about `y3` through the wrist center.
pub fn png_translation_command(
    u: &JoystickSample,
    f3: &ControlFrame3,
    p_ee: &Vector3<f64>,
    p_wrist: &Vector3<f64>,
    gains: &GainConfig,
) -> PngTranslation {
    let mut linear = Vector3::z() * (u.u_tw * gains.k_z);
    let mut angular = Vector3::zeros();
    let forward_suppressed = !f3.usable && u.u_fb != 0.0;
    if f3.usable {
        linear += f3.z3 * (u.u_fb * gains.k_t);
        if u.u_lr != 0.0 {
            angular = f3.y3.normalize() * (u.u_lr * gains.k_s);
            linear += angular.cross(&(p_ee - p_wrist));
        }
    }
    PngTranslation {
        twist: Twist::new(linear, angular),
        forward_suppressed,
    }
}

/// Goal orientation for rotation mode: the home orientation displaced by at
/// most `alpha` about an axis in the home `x2`/`y2` plane.
pub fn png_rotation_goal(u: &JoystickSample, home: &RotationHome, alpha: f64) -> Rotation3<f64> {
    let mut c = home.frame2.x2 * u.u_fb + home.frame2.y2 * u.u_lr;
    let n = c.norm();
    if n > 1.0 {
        c /= n;
    }
    Rotation3::new(c * alpha) * home.pose.orientation
}

fn ee_frame_rotation(u: &JoystickSample, r1: &Rotation3<f64>, k_s: f64) -> Vector3<f64> {
    r1 * Vector3::new(u.u_fb, u.u_lr, u.u_tw) * k_s
}

/// Base-frame translation, EE-frame angular velocity.
pub fn cartesian_command(
    u: &JoystickSample,
    mode: Mode,
    r1: &Rotation3<f64>,
    gains: &GainConfig,
) -> Twist {
    match mode {
        Mode::Translation => Twist::linear(Vector3::new(
            u.u_fb * gains.k_t,
            u.u_lr * gains.k_t,
            u.u_tw * gains.k_z,
        )),
        Mode::Rotation => Twist::angular(ee_frame_rotation(u, r1, gains.k_s)),
    }
}

/// EE-frame translation (forward along `z1`), rotation as Cartesian.
pub fn pilot_command(u: &JoystickSample, mode: Mode, r1: &Rotation3<f64>, gains: &GainConfig) -> Twist {
    match mode {
        Mode::Translation => {
            let m = r1.matrix();
            Twist::linear(
                m.column(2) * (u.u_fb * gains.k_t)
                    + m.column(0) * (u.u_lr * gains.k_t)
                    + m.column(1) * (u.u_tw * gains.k_z),
            )
        }
        Mode::Rotation => Twist::angular(ee_frame_rotation(u, r1, gains.k_s)),
    }
}
