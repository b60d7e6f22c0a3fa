#![allow(dead_code)]

use nalgebra::Rotation3;
use pointgo_core::control::{Buttons, ControlSystem, GainConfig, JoystickSample};
use pointgo_core::kinematics::KinematicChain;
use pointgo_core::sim::{World, DEFAULT_DT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn home_q() -> Vec<f64> {
    [0.0, 15.0, 180.0, -130.0, 0.0, 55.0, 90.0]
        .iter()
        .map(|d: &f64| d.to_radians())
        .collect()
}

/// Uniform over the joint limits, with continuous joints restricted to one turn.
pub fn random_q(chain: &KinematicChain, rng: &mut impl Rng) -> Vec<f64> {
    chain
        .joint_limits()
        .iter()
        .map(|l| rng.gen_range(l.min.max(-std::f64::consts::PI)..l.max.min(std::f64::consts::PI)))
        .collect()
}

/// Home with ±10° on every joint but the first (±30°) and the last (±180°).
pub fn near_home_q(rng: &mut impl Rng) -> Vec<f64> {
    let spread = [30.0, 10.0, 10.0, 10.0, 10.0, 10.0, 180.0_f64];
    home_q()
        .iter()
        .zip(spread)
        .map(|(q, s)| q + rng.gen_range(-s..s).to_radians())
        .collect()
}

pub fn world(system: ControlSystem, q: Vec<f64>) -> World {
    World::new(KinematicChain::gen3(), GainConfig::default(), system, q, DEFAULT_DT).unwrap()
}

pub fn press() -> JoystickSample {
    JoystickSample::default().with_buttons(Buttons {
        mode_switch: true,
        ..Buttons::default()
    })
}

/// Geodesic distance between two orientations [rad]. The half-angle atan2
/// stays accurate for tiny angles, where the trace formula loses precision.
pub fn angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&a.rotation_to(b));
    2.0 * q.imag().norm().atan2(q.w.abs())
}

/// Largest deviation of `m` from the identity after `mᵀm`.
pub fn orthonormality_defect(cols: [nalgebra::Vector3<f64>; 3]) -> f64 {
    let m = nalgebra::Matrix3::from_columns(&cols);
    (m.transpose() * m - nalgebra::Matrix3::identity()).amax()
}

/// Home with the arm joints perturbed and the wrist bend left at home, so
/// 45° tilts in any direction keep clear of the wrist singularity.
pub fn arm_perturbed_q(rng: &mut impl Rng) -> Vec<f64> {
    let spread = [30.0, 10.0, 10.0, 10.0, 0.0, 0.0, 180.0_f64];
    home_q()
        .iter()
        .zip(spread)
        .map(|(q, s)| if s > 0.0 { q + rng.gen_range(-s..s).to_radians() } else { *q })
        .collect()
}
