//! Forward kinematics, the geometric Jacobian and damped-least-squares twist
//! resolution for a serial revolute chain.
//!
//! Everything here is a pure function of its inputs.

mod chain;

pub use chain::{ChainBuilder, DhParams, JointLimit, KinematicChain, CHAIN_FORMAT_VERSION};

use nalgebra::{DMatrix, DVector, Isometry3, Rotation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default DLS damping.
pub const DEFAULT_DAMPING: f64 = 1e-2;

/// Position and orientation of a frame in base coordinates. The rotation maps
/// frame-local vectors into the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Rotation3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Rotation3::identity(),
        }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self {
            position: iso.translation.vector,
            orientation: iso.rotation.to_rotation_matrix(),
        }
    }

    /// Frame x axis in base coordinates.
    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation.matrix().column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.orientation.matrix().column(1).into_owned()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation.matrix().column(2).into_owned()
    }
}

/// Spatial velocity of the end-effector: linear [m/s] and angular [rad/s],
/// both in base coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear(linear: Vector3<f64>) -> Self {
        Self::new(linear, Vector3::zeros())
    }

    pub fn angular(angular: Vector3<f64>) -> Self {
        Self::new(Vector3::zeros(), angular)
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub timestamp: f64,
}

impl JointState {
    pub fn at_rest(q: Vec<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: vec![0.0; n],
            timestamp: 0.0,
        }
    }
}

/// Poses of every link frame (index 0 is the base frame) plus the
/// end-effector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPoses {
    pub links: Vec<Pose>,
    pub ee: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwistResolution {
    pub qdot: DVector<f64>,
    /// `‖J·q̇ − desired‖` after velocity limiting.
    pub residual: f64,
    /// Uniform factor applied to meet the joint velocity limits (1 when none).
    pub scale: f64,
}

fn check_dim(chain: &KinematicChain, q: &[f64]) -> Result<()> {
    if q.len() != chain.dof() {
        return Err(Error::DimensionMismatch {
            expected: chain.dof(),
            got: q.len(),
        });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("joint vector has non-finite entries".into()));
    }
    Ok(())
}

fn link_isometries(chain: &KinematicChain, q: &[f64]) -> Vec<Isometry3<f64>> {
    let mut frames = Vec::with_capacity(q.len() + 1);
    let mut t = chain.base_transform();
    frames.push(t);
    for (dh, &qi) in chain.joints().iter().zip(q) {
        t *= dh.transform(qi);
        frames.push(t);
    }
    frames
}

pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<LinkPoses> {
    check_dim(chain, q)?;
    let frames = link_isometries(chain, q);
    let ee = frames[chain.ee_link()] * chain.tool_transform();
    Ok(LinkPoses {
        links: frames.iter().map(Pose::from_isometry).collect(),
        ee: Pose::from_isometry(&ee),
    })
}

/// End-effector pose only.
pub fn ee_pose(chain: &KinematicChain, q: &[f64]) -> Result<Pose> {
    forward_kinematics(chain, q).map(|fk| fk.ee)
}

/// Geometric Jacobian, 6×n. Rows 0..3 are linear velocity, rows 3..6 angular
/// velocity of the end-effector, in base coordinates.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(chain, q)?;
    let frames = link_isometries(chain, q);
    Ok(jacobian_from_frames(chain, &frames))
}

fn jacobian_from_frames(chain: &KinematicChain, frames: &[Isometry3<f64>]) -> DMatrix<f64> {
    let n = chain.dof();
    let p_ee = (frames[chain.ee_link()] * chain.tool_transform())
        .translation
        .vector;
    let mut jac = DMatrix::zeros(6, n);
    // Joints beyond the end-effector link do not move it.
    for (i, frame) in frames.iter().enumerate().take(chain.ee_link().min(n)) {
        let axis = frame.rotation * Vector3::z();
        let origin = frame.translation.vector;
        let lin = axis.cross(&(p_ee - origin));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
    }
    jac
}

/// Origin of the declared wrist-center link frame.
pub fn wrist_center(chain: &KinematicChain, q: &[f64]) -> Result<Vector3<f64>> {
    let link = chain.wrist_center_link().ok_or_else(|| {
        Error::Config(format!("chain `{}` declares no wrist center link", chain.name()))
    })?;
    check_dim(chain, q)?;
    let frames = link_isometries(chain, q);
    Ok(frames[link].translation.vector)
}

/// Distance from the wrist center to each wrist joint axis (the joints after
/// the wrist-center link's parent). All are zero for a spherical wrist.
pub fn wrist_axis_offsets(chain: &KinematicChain, q: &[f64]) -> Result<Vec<f64>> {
    let center = wrist_center(chain, q)?;
    let link = chain.wrist_center_link().unwrap_or_default();
    let frames = link_isometries(chain, q);
    // Joint j (1-based) turns about the z axis of frame j-1.
    let first_joint = link.max(1);
    Ok((first_joint..=chain.dof())
        .map(|j| {
            let axis = frames[j - 1].rotation * Vector3::z();
            let origin = frames[j - 1].translation.vector;
            let rel = center - origin;
            (rel - axis * axis.dot(&rel)).norm()
        })
        .collect())
}

/// Damped least squares: `q̇ = Jᵀ (J Jᵀ + λ² I)⁻¹ · twist`, then scaled
/// uniformly so that every joint respects its velocity limit.
pub fn resolve_twist(
    chain: &KinematicChain,
    q: &[f64],
    desired: &Twist,
    damping: f64,
) -> Result<TwistResolution> {
    resolve_twist_locked(chain, q, desired, damping, &[])
}

/// [`resolve_twist`] with the joints flagged in `locked` held still; the
/// remaining joints absorb their share. Missing flags mean unlocked.
pub fn resolve_twist_locked(
    chain: &KinematicChain,
    q: &[f64],
    desired: &Twist,
    damping: f64,
    locked: &[bool],
) -> Result<TwistResolution> {
    if !(damping > 0.0 && damping.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "damping must be positive, got {damping}"
        )));
    }
    let mut jac = jacobian(chain, q)?;
    let target = desired.to_vector();
    let target = DVector::from_column_slice(target.as_slice());
    let full = jac.clone();
    for (i, _) in locked.iter().enumerate().filter(|(_, l)| **l) {
        jac.column_mut(i).fill(0.0);
    }

    let mut gram = &jac * jac.transpose();
    for i in 0..6 {
        gram[(i, i)] += damping * damping;
    }
    let weights = gram
        .cholesky()
        .map(|c| c.solve(&target))
        .ok_or_else(|| Error::InvalidInput("damped Gram matrix is not positive definite".into()))?;
    let mut qdot = jac.transpose() * weights;
    let scale = limit_joint_velocities(chain, qdot.as_mut_slice());
    let residual = (&full * &qdot - target).norm();
    Ok(TwistResolution {
        qdot,
        residual,
        scale,
    })
}

/// Joints sitting on a position limit that `qdot` would push further out.
pub fn saturated_joints(chain: &KinematicChain, q: &[f64], qdot: &[f64]) -> Vec<bool> {
    chain
        .joint_limits()
        .iter()
        .zip(q.iter().zip(qdot))
        .map(|(l, (&qi, &vi))| (qi <= l.min && vi < 0.0) || (qi >= l.max && vi > 0.0))
        .collect()
}

/// Scales `qdot` uniformly so no joint exceeds its limit; returns the factor.
pub fn limit_joint_velocities(chain: &KinematicChain, qdot: &mut [f64]) -> f64 {
    let scale = qdot
        .iter()
        .zip(chain.velocity_limits())
        .map(|(&v, &lim)| if v.abs() > lim { lim / v.abs() } else { 1.0 })
        .fold(1.0_f64, f64::min);
    if scale < 1.0 {
        qdot.iter_mut().for_each(|v| *v *= scale);
    }
    scale
}

/// Position-only inverse kinematics by damped least-squares iteration from
/// `seed`, clamped to joint limits. Returns `None` when the EE does not get
/// within `tol` of `target`.
pub fn position_ik(
    chain: &KinematicChain,
    seed: &[f64],
    target: &Vector3<f64>,
    tol: f64,
) -> Result<Option<Vec<f64>>> {
    const ITERATIONS: usize = 500;
    const MAX_STEP: f64 = 0.2;
    check_dim(chain, seed)?;
    let mut q = seed.to_vec();
    for _ in 0..ITERATIONS {
        let frames = link_isometries(chain, &q);
        let p = (frames[chain.ee_link()] * chain.tool_transform()).translation.vector;
        let err = target - p;
        if err.norm() < tol {
            return Ok(Some(q));
        }
        let jv = jacobian_from_frames(chain, &frames).rows(0, 3).into_owned();
        let mut gram = &jv * jv.transpose();
        for i in 0..3 {
            gram[(i, i)] += 1e-4;
        }
        let Some(chol) = gram.cholesky() else {
            return Ok(None);
        };
        let e = DVector::from_column_slice(err.as_slice());
        let mut dq = jv.transpose() * chol.solve(&e);
        let n = dq.amax();
        if n > MAX_STEP {
            dq *= MAX_STEP / n;
        }
        for (qi, d) in q.iter_mut().zip(dq.iter()) {
            *qi += d;
        }
        chain.clamp_to_limits(&mut q);
    }
    Ok(None)
}

/// Caps the linear and angular parts independently; never scales up.
pub fn clamp_ee_speed(t: &Twist, v_max: f64, w_max: f64) -> Twist {
    fn cap(v: Vector3<f64>, max: f64) -> Vector3<f64> {
        let n = v.norm();
        if n > max {
            v * (max / n)
        } else {
            v
        }
    }
    Twist::new(cap(t.linear, v_max), cap(t.angular, w_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn assert_vec(actual: Vector3<f64>, expected: Vector3<f64>, tol: f64) {
        assert!(
            (actual - expected).norm() < tol,
            "expected {expected:?}, got {actual:?}"
        );
    }

    #[test]
    fn planar_2r_extended() {
        let chain = KinematicChain::planar_2r();
        let ee = ee_pose(&chain, &[0.0, 0.0]).unwrap();
        assert_vec(ee.position, Vector3::new(2.0, 0.0, 0.0), 1e-12);
    }

    #[test]
    fn planar_2r_quarter_turn() {
        let chain = KinematicChain::planar_2r();
        let ee = ee_pose(&chain, &[FRAC_PI_2, 0.0]).unwrap();
        assert_vec(ee.position, Vector3::new(0.0, 2.0, 0.0), 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let chain = KinematicChain::planar_2r();
        assert!(matches!(
            forward_kinematics(&chain, &[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(jacobian(&chain, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn planar_2r_jacobian_matches_analytic() {
        // Analytic 2R Jacobian: col1 = (-l1 s1 - l2 s12, l1 c1 + l2 c12),
        // col2 = (-l2 s12, l2 c12).
        let chain = KinematicChain::planar_2r();
        let jac = jacobian(&chain, &[0.0, 0.0]).unwrap();
        assert_vec(jac.fixed_view::<3, 1>(0, 0).into_owned(), Vector3::new(0.0, 2.0, 0.0), 1e-12);
        assert_vec(jac.fixed_view::<3, 1>(0, 1).into_owned(), Vector3::new(0.0, 1.0, 0.0), 1e-12);
        let (q1, q2) = (0.3_f64, -1.1_f64);
        let jac = jacobian(&chain, &[q1, q2]).unwrap();
        let analytic = [
            (-q1.sin() - (q1 + q2).sin(), q1.cos() + (q1 + q2).cos()),
            (-(q1 + q2).sin(), (q1 + q2).cos()),
        ];
        for (col, (jx, jy)) in analytic.iter().enumerate() {
            assert!((jac[(0, col)] - jx).abs() < 1e-12);
            assert!((jac[(1, col)] - jy).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_on_vertical_axis_is_pure_spin() {
        // Tip sits on the joint-1 axis, so joint 1 only spins it about z_b.
        let limit = JointLimit { min: -3.0, max: 3.0 };
        let chain = KinematicChain::builder("spin")
            .joint(DhParams::new(0.0, 0.0, 0.5, 0.0), limit, 1.0)
            .joint(DhParams::new(0.0, 0.0, 0.5, 0.0), limit, 1.0)
            .build()
            .unwrap();
        let jac = jacobian(&chain, &[0.2, -0.4]).unwrap();
        assert_vec(jac.fixed_view::<3, 1>(0, 0).into_owned(), Vector3::zeros(), 1e-15);
        assert_vec(jac.fixed_view::<3, 1>(3, 0).into_owned(), Vector3::z(), 1e-15);
    }

    #[test]
    fn wrist_center_requires_declaration() {
        let chain = KinematicChain::planar_2r();
        assert!(matches!(wrist_center(&chain, &[0.0, 0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn gen3_wrist_is_spherical_at_zero() {
        let chain = KinematicChain::gen3();
        let offsets = wrist_axis_offsets(&chain, &[0.0; 7]).unwrap();
        assert_eq!(offsets.len(), 3);
        assert!(offsets.iter().all(|&d| d < 1e-9), "{offsets:?}");
    }

    #[test]
    fn zero_twist_resolves_to_zero() {
        let chain = KinematicChain::gen3();
        let q = [0.0, 0.26, 3.1, -2.27, 0.0, 0.96, 1.57];
        let res = resolve_twist(&chain, &q, &Twist::zero(), 1e-2).unwrap();
        assert_eq!(res.qdot.norm(), 0.0);
        assert_eq!(res.residual, 0.0);
    }

    #[test]
    fn nonpositive_damping_is_rejected() {
        let chain = KinematicChain::gen3();
        assert!(resolve_twist(&chain, &[0.0; 7], &Twist::zero(), 0.0).is_err());
    }

    #[test]
    fn clamp_leaves_slow_twists() {
        let t = Twist::linear(Vector3::new(0.05, 0.0, 0.0));
        assert_eq!(clamp_ee_speed(&t, 0.1, 1.0), t);
    }

    #[test]
    fn clamp_scales_fast_linear_only() {
        let t = Twist::new(Vector3::new(0.2, 0.0, 0.0), Vector3::new(0.0, 0.3, 0.0));
        let c = clamp_ee_speed(&t, 0.1, 1.0);
        assert_vec(c.linear, Vector3::new(0.1, 0.0, 0.0), 1e-15);
        assert_eq!(c.angular, t.angular);
    }

    #[test]
    fn locked_joint_stays_still_and_others_compensate() {
        let chain = KinematicChain::gen3();
        let q = [0.1, 0.4, 3.0, -1.9, 0.2, 0.9, 1.2];
        let t = Twist::new(Vector3::new(0.01, -0.02, 0.005), Vector3::new(0.0, 0.02, -0.01));
        let mut locked = vec![false; 7];
        locked[2] = true;
        let res = resolve_twist_locked(&chain, &q, &t, 1e-3, &locked).unwrap();
        assert_eq!(res.qdot[2], 0.0);
        assert!(res.residual < 1e-5, "{}", res.residual);
    }

    #[test]
    fn saturation_only_flags_outward_motion() {
        let chain = KinematicChain::gen3();
        let mut q = vec![0.0; 7];
        q[1] = chain.joint_limits()[1].max;
        let mut qdot = vec![0.0; 7];
        qdot[1] = 0.1;
        assert!(saturated_joints(&chain, &q, &qdot)[1]);
        qdot[1] = -0.1;
        assert!(!saturated_joints(&chain, &q, &qdot)[1]);
    }
}
