//! Serial chain description and its on-disk format.
//!
//! Joints use the standard (distal) Denavit–Hartenberg convention:
//! `T_i = Rz(q_i + theta_offset) · Tz(d) · Tx(a) · Rx(alpha)`.
//! Link frame 0 is the base frame after the optional fixed base transform;
//! link frame `i` is attached after joint `i`, so joint `i` rotates about the
//! z axis of link frame `i - 1`.

use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHAIN_FORMAT_VERSION: u32 = 1;

const GEN3_TOML: &str = include_str!("../../data/gen3_7dof.toml");

/// One DH row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhParams {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhParams {
    pub const fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    /// Homogeneous transform for joint angle `q`.
    pub fn transform(&self, q: f64) -> Isometry3<f64> {
        let theta = q + self.theta_offset;
        let rot_z = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta);
        let rot_x = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        // Rz(θ)·Tz(d)·Tx(a)·Rx(α): the translation is (a cosθ, a sinθ, d).
        let translation = Translation3::new(self.a * theta.cos(), self.a * theta.sin(), self.d);
        Isometry3::from_parts(translation, rot_z * rot_x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub min: f64,
    pub max: f64,
}

impl JointLimit {
    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.min, self.max)
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.min && q <= self.max
    }
}

/// A serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    base: Option<DhParams>,
    joints: Vec<DhParams>,
    joint_limits: Vec<JointLimit>,
    velocity_limits: Vec<f64>,
    wrist_center_link: Option<usize>,
    ee_link: usize,
    tool_offset: f64,
}

impl KinematicChain {
    pub fn builder(name: impl Into<String>) -> ChainBuilder {
        ChainBuilder {
            chain: KinematicChain {
                name: name.into(),
                base: None,
                joints: Vec::new(),
                joint_limits: Vec::new(),
                velocity_limits: Vec::new(),
                wrist_center_link: None,
                ee_link: 0,
                tool_offset: 0.0,
            },
            ee_link: None,
        }
    }

    /// The bundled Kinova-Gen3-like 7-DOF chain.
    pub fn gen3() -> Self {
        Self::from_toml_str(GEN3_TOML).expect("bundled chain file is valid")
    }

    /// Two-link planar arm with unit links, used by tests and examples.
    pub fn planar_2r() -> Self {
        let limit = JointLimit {
            min: -std::f64::consts::PI,
            max: std::f64::consts::PI,
        };
        Self::builder("planar-2r")
            .joint(DhParams::new(1.0, 0.0, 0.0, 0.0), limit, 2.0)
            .joint(DhParams::new(1.0, 0.0, 0.0, 0.0), limit, 2.0)
            .build()
            .expect("planar chain is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ChainFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<chain>".into(),
            message: e.to_string(),
        })?;
        file.into_chain()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ChainFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_chain()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ChainFile::from(self)).expect("chain serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[DhParams] {
        &self.joints
    }

    pub fn base(&self) -> Option<&DhParams> {
        self.base.as_ref()
    }

    pub fn joint_limits(&self) -> &[JointLimit] {
        &self.joint_limits
    }

    pub fn velocity_limits(&self) -> &[f64] {
        &self.velocity_limits
    }

    pub fn wrist_center_link(&self) -> Option<usize> {
        self.wrist_center_link
    }

    pub fn ee_link(&self) -> usize {
        self.ee_link
    }

    pub fn tool_offset(&self) -> f64 {
        self.tool_offset
    }

    pub(crate) fn base_transform(&self) -> Isometry3<f64> {
        self.base
            .map(|b| b.transform(0.0))
            .unwrap_or_else(Isometry3::identity)
    }

    pub(crate) fn tool_transform(&self) -> Isometry3<f64> {
        Isometry3::translation(0.0, 0.0, self.tool_offset)
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q
                .iter()
                .zip(&self.joint_limits)
                .all(|(&qi, lim)| lim.contains(qi))
    }

    /// Clamps every joint to its position limit in place.
    pub fn clamp_to_limits(&self, q: &mut [f64]) {
        for (qi, lim) in q.iter_mut().zip(&self.joint_limits) {
            *qi = lim.clamp(*qi);
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.joints.len();
        if n < 2 {
            return Err(Error::Config(format!(
                "chain `{}` needs at least 2 joints, has {n}",
                self.name
            )));
        }
        if self.joint_limits.len() != n || self.velocity_limits.len() != n {
            return Err(Error::Config("limit arrays do not match joint count".into()));
        }
        for (i, dh) in self.joints.iter().chain(self.base.iter()).enumerate() {
            if ![dh.a, dh.alpha, dh.d, dh.theta_offset]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::Config(format!("DH row {i} has non-finite values")));
            }
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if !(lim.min.is_finite() && lim.max.is_finite() && lim.min < lim.max) {
                return Err(Error::Config(format!(
                    "joint {} limits must satisfy min < max (got {} .. {})",
                    i + 1,
                    lim.min,
                    lim.max
                )));
            }
        }
        for (i, &v) in self.velocity_limits.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "joint {} velocity limit must be positive",
                    i + 1
                )));
            }
        }
        if self.ee_link == 0 || self.ee_link > n {
            return Err(Error::Config(format!(
                "ee_link {} outside 1..={n}",
                self.ee_link
            )));
        }
        if let Some(w) = self.wrist_center_link {
            if w > n {
                return Err(Error::Config(format!(
                    "wrist_center_link {w} outside 0..={n}"
                )));
            }
        }
        if !self.tool_offset.is_finite() {
            return Err(Error::Config("tool_offset must be finite".into()));
        }
        Ok(())
    }
}

pub struct ChainBuilder {
    chain: KinematicChain,
    ee_link: Option<usize>,
}

impl ChainBuilder {
    pub fn base(mut self, base: DhParams) -> Self {
        self.chain.base = Some(base);
        self
    }

    pub fn joint(mut self, dh: DhParams, limit: JointLimit, max_velocity: f64) -> Self {
        self.chain.joints.push(dh);
        self.chain.joint_limits.push(limit);
        self.chain.velocity_limits.push(max_velocity);
        self
    }

    pub fn wrist_center_link(mut self, link: usize) -> Self {
        self.chain.wrist_center_link = Some(link);
        self
    }

    /// Defaults to the last link.
    pub fn ee_link(mut self, link: usize) -> Self {
        self.ee_link = Some(link);
        self
    }

    pub fn tool_offset(mut self, offset: f64) -> Self {
        self.chain.tool_offset = offset;
        self
    }

    pub fn build(mut self) -> Result<KinematicChain> {
        self.chain.ee_link = self.ee_link.unwrap_or(self.chain.joints.len());
        self.chain.validate()?;
        Ok(self.chain)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainFile {
    format_version: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wrist_center_link: Option<usize>,
    ee_link: usize,
    #[serde(default)]
    tool_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<DhParams>,
    joints: Vec<JointRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointRow {
    a: f64,
    alpha: f64,
    d: f64,
    #[serde(default)]
    theta_offset: f64,
    min: f64,
    max: f64,
    max_velocity: f64,
}

impl ChainFile {
    fn into_chain(self) -> Result<KinematicChain> {
        if self.format_version != CHAIN_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "chain file",
                found: self.format_version,
                expected: CHAIN_FORMAT_VERSION,
            });
        }
        let mut builder = KinematicChain::builder(self.name)
            .ee_link(self.ee_link)
            .tool_offset(self.tool_offset);
        if let Some(base) = self.base {
            builder = builder.base(base);
        }
        if let Some(w) = self.wrist_center_link {
            builder = builder.wrist_center_link(w);
        }
        for row in self.joints {
            builder = builder.joint(
                DhParams::new(row.a, row.alpha, row.d, row.theta_offset),
                JointLimit {
                    min: row.min,
                    max: row.max,
                },
                row.max_velocity,
            );
        }
        builder.build()
    }
}

impl From<&KinematicChain> for ChainFile {
    fn from(chain: &KinematicChain) -> Self {
        ChainFile {
            format_version: CHAIN_FORMAT_VERSION,
            name: chain.name.clone(),
            wrist_center_link: chain.wrist_center_link,
            ee_link: chain.ee_link,
            tool_offset: chain.tool_offset,
            base: chain.base,
            joints: chain
                .joints
                .iter()
                .zip(&chain.joint_limits)
                .zip(&chain.velocity_limits)
                .map(|((dh, lim), &v)| JointRow {
                    a: dh.a,
                    alpha: dh.alpha,
                    d: dh.d,
                    theta_offset: dh.theta_offset,
                    min: lim.min,
                    max: lim.max,
                    max_velocity: v,
                })
                .collect(),
        }
    }
}
