use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ee_pose, position_ik, KinematicChain, Pose};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// Reachability tolerance for scenario anchor points [m].
const REACH_TOL: f64 = 1e-3;

/// A handle further than this from the current door angle does not drag it.
pub const HINGE_REENGAGE: f64 = 5.0 * PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    OrientTarget,
    Goalpost,
    HingeArc,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::OrientTarget, Self::Goalpost, Self::HingeArc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OrientTarget => "orient_target",
            Self::Goalpost => "goalpost",
            Self::HingeArc => "hinge_arc",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioGeometry {
    /// Aim `z2` along `direction`.
    OrientTarget { direction: Vector3<f64>, tolerance: f64 },
    /// Cross the plane through `center` normal to `approach`, within
    /// `aperture / 2` of the center and with `z2` within `angle_tolerance` of `approach`.
    Goalpost {
        center: Vector3<f64>,
        approach: Vector3<f64>,
        aperture: f64,
        angle_tolerance: f64,
    },
    /// Drag the handle counter-clockwise (seen from above) about a vertical
    /// hinge from `start_angle` through `span`, staying within `tube` of the arc.
    HingeArc {
        hinge: Vector3<f64>,
        radius: f64,
        start_angle: f64,
        span: f64,
        tube: f64,
    },
}

impl ScenarioGeometry {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::OrientTarget { .. } => ScenarioKind::OrientTarget,
            Self::Goalpost { .. } => ScenarioKind::Goalpost,
            Self::HingeArc { .. } => ScenarioKind::HingeArc,
        }
    }
}

/// Point on a hinge arc at door angle `door`.
pub fn arc_point(hinge: &Vector3<f64>, radius: f64, start_angle: f64, door: f64) -> Vector3<f64> {
    let a = start_angle + door;
    hinge + Vector3::new(a.cos(), a.sin(), 0.0) * radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskScenario {
    pub name: String,
    pub geometry: ScenarioGeometry,
    /// Nominal start configuration [rad].
    pub q0: Vec<f64>,
    /// Per-joint half-width of the uniform start perturbation [rad].
    pub noise: Vec<f64>,
    pub max_time: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    name: String,
    max_time: f64,
    q0_deg: Vec<f64>,
    noise_deg: Vec<f64>,
    geometry: GeometryFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GeometryFile {
    OrientTarget {
        azimuth_deg: f64,
        elevation_deg: f64,
        tolerance_deg: f64,
    },
    Goalpost {
        center: [f64; 3],
        approach: [f64; 3],
        aperture: f64,
        angle_tolerance_deg: f64,
    },
    HingeArc {
        hinge: [f64; 3],
        radius: f64,
        start_angle_deg: f64,
        span_deg: f64,
        tube: f64,
    },
}

impl From<GeometryFile> for ScenarioGeometry {
    fn from(g: GeometryFile) -> Self {
        match g {
            GeometryFile::OrientTarget {
                azimuth_deg,
                elevation_deg,
                tolerance_deg,
            } => {
                let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
                Self::OrientTarget {
                    direction: Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()),
                    tolerance: tolerance_deg.to_radians(),
                }
            }
            GeometryFile::Goalpost {
                center,
                approach,
                aperture,
                angle_tolerance_deg,
            } => Self::Goalpost {
                center: center.into(),
                approach: Vector3::from(approach).normalize(),
                aperture,
                angle_tolerance: angle_tolerance_deg.to_radians(),
            },
            GeometryFile::HingeArc {
                hinge,
                radius,
                start_angle_deg,
                span_deg,
                tube,
            } => Self::HingeArc {
                hinge: hinge.into(),
                radius,
                start_angle: start_angle_deg.to_radians(),
                span: span_deg.to_radians(),
                tube,
            },
        }
    }
}

impl From<&ScenarioGeometry> for GeometryFile {
    fn from(g: &ScenarioGeometry) -> Self {
        match g {
            ScenarioGeometry::OrientTarget { direction, tolerance } => Self::OrientTarget {
                azimuth_deg: direction.y.atan2(direction.x).to_degrees(),
                elevation_deg: direction.z.clamp(-1.0, 1.0).asin().to_degrees(),
                tolerance_deg: tolerance.to_degrees(),
            },
            ScenarioGeometry::Goalpost {
                center,
                approach,
                aperture,
                angle_tolerance,
            } => Self::Goalpost {
                center: (*center).into(),
                approach: (*approach).into(),
                aperture: *aperture,
                angle_tolerance_deg: angle_tolerance.to_degrees(),
            },
            ScenarioGeometry::HingeArc {
                hinge,
                radius,
                start_angle,
                span,
                tube,
            } => Self::HingeArc {
                hinge: (*hinge).into(),
                radius: *radius,
                start_angle_deg: start_angle.to_degrees(),
                span_deg: span.to_degrees(),
                tube: *tube,
            },
        }
    }
}

impl TaskScenario {
    pub fn builtin(kind: ScenarioKind) -> Self {
        let text = match kind {
            ScenarioKind::OrientTarget => include_str!("../../data/scenarios/orient_target.toml"),
            ScenarioKind::Goalpost => include_str!("../../data/scenarios/goalpost.toml"),
            ScenarioKind::HingeArc => include_str!("../../data/scenarios/hinge_arc.toml"),
        };
        Self::from_toml_str(text).expect("bundled scenario parses")
    }

    pub fn kind(&self) -> ScenarioKind {
        self.geometry.kind()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        if file.format_version != SCENARIO_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "scenario file",
                found: file.format_version,
                expected: SCENARIO_FORMAT_VERSION,
            });
        }
        let s = Self {
            name: file.name,
            geometry: file.geometry.into(),
            q0: file.q0_deg.iter().map(|d| d.to_radians()).collect(),
            noise: file.noise_deg.iter().map(|d| d.to_radians()).collect(),
            max_time: file.max_time,
        };
        s.validate()?;
        Ok(s)
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
        toml::to_string(&ScenarioFile {
            format_version: SCENARIO_FORMAT_VERSION,
            name: self.name.clone(),
            max_time: self.max_time,
            q0_deg: self.q0.iter().map(|r| r.to_degrees()).collect(),
            noise_deg: self.noise.iter().map(|r| r.to_degrees()).collect(),
            geometry: (&self.geometry).into(),
        })
        .expect("scenario serializes")
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scenario `{}`: {m}", self.name)));
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return bad("max_time must be positive");
        }
        if self.q0.len() != self.noise.len() {
            return bad("q0 and noise lengths differ");
        }
        if self.noise.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return bad("noise bounds must be finite and >= 0");
        }
        match &self.geometry {
            ScenarioGeometry::OrientTarget { tolerance, .. } if *tolerance <= 0.0 => {
                bad("tolerance must be positive")
            }
            ScenarioGeometry::Goalpost {
                aperture,
                angle_tolerance,
                ..
            } if *aperture <= 0.0 || *angle_tolerance <= 0.0 => bad("gate sizes must be positive"),
            ScenarioGeometry::HingeArc {
                radius, span, tube, ..
            } if *radius <= 0.0 || *span <= 0.0 || *tube <= 0.0 => bad("arc sizes must be positive"),
            _ => Ok(()),
        }
    }

    /// Anchor points the end-effector must be able to reach.
    pub fn anchor_points(&self) -> Vec<Vector3<f64>> {
        match &self.geometry {
            ScenarioGeometry::OrientTarget { .. } => Vec::new(),
            ScenarioGeometry::Goalpost { center, approach, .. } => {
                vec![center - approach * 0.1, *center, center + approach * 0.05]
            }
            ScenarioGeometry::HingeArc {
                hinge,
                radius,
                start_angle,
                span,
                ..
            } => (0..=4)
                .map(|i| arc_point(hinge, *radius, *start_angle, span * f64::from(i) / 4.0))
                .collect(),
        }
    }

    /// Checks that the start configuration is valid for `chain` and every
    /// anchor point has a position-only IK solution.
    pub fn check_reachable(&self, chain: &KinematicChain) -> Result<()> {
        let unreachable = |reason: String| Error::Unreachable {
            scenario: self.name.clone(),
            reason,
        };
        if self.q0.len() != chain.dof() {
            return Err(unreachable(format!(
                "q0 has {} joints, chain has {}",
                self.q0.len(),
                chain.dof()
            )));
        }
        if !chain.within_limits(&self.q0) {
            return Err(unreachable("q0 violates joint limits".into()));
        }
        for p in self.anchor_points() {
            if position_ik(chain, &self.q0, &p, REACH_TOL)?.is_none() {
                return Err(unreachable(format!(
                    "no IK solution for point [{:.3}, {:.3}, {:.3}]",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(())
    }

    /// Start configuration with seeded uniform noise, clamped to joint limits.
    pub fn sample_start(&self, chain: &KinematicChain, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<f64> = self
            .q0
            .iter()
            .zip(&self.noise)
            .map(|(&q, &n)| if n > 0.0 { q + rng.gen_range(-n..=n) } else { q })
            .collect();
        chain.clamp_to_limits(&mut q);
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub success: bool,
    /// Task completion in `[0, 1]`.
    pub progress: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Follows one episode of a scenario and latches success.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTracker {
    geometry: ScenarioGeometry,
    initial_error: f64,
    prev_position: Vector3<f64>,
    door: f64,
    success: bool,
    last: Progress,
}

impl ScenarioTracker {
    pub fn new(scenario: &TaskScenario, ee: &Pose) -> Self {
        let geometry = scenario.geometry.clone();
        let initial_error = match &geometry {
            ScenarioGeometry::OrientTarget { direction, .. } => ee.z_axis().angle(direction),
            ScenarioGeometry::Goalpost { center, .. } => (ee.position - center).norm(),
            ScenarioGeometry::HingeArc { .. } => 0.0,
        };
        let mut t = Self {
            geometry,
            initial_error,
            prev_position: ee.position,
            door: 0.0,
            success: false,
            last: Progress {
                success: false,
                progress: 0.0,
            },
        };
        t.update(ee);
        t
    }

    pub fn geometry(&self) -> &ScenarioGeometry {
        &self.geometry
    }

    /// Current door angle for a hinge scenario.
    pub fn door_angle(&self) -> Option<f64> {
        matches!(self.geometry, ScenarioGeometry::HingeArc { .. }).then_some(self.door)
    }

    pub fn progress(&self) -> Progress {
        self.last
    }

    pub fn update(&mut self, ee: &Pose) -> Progress {
        let p = ee.position;
        let z2 = ee.z_axis();
        let progress = match &self.geometry {
            ScenarioGeometry::OrientTarget { direction, tolerance } => {
                let err = z2.angle(direction);
                if err < *tolerance {
                    self.success = true;
                }
                if self.initial_error > 0.0 {
                    1.0 - err / self.initial_error
                } else {
                    1.0
                }
            }
            ScenarioGeometry::Goalpost {
                center,
                approach,
                aperture,
                angle_tolerance,
            } => {
                let s0 = (self.prev_position - center).dot(approach);
                let s1 = (p - center).dot(approach);
                if s0 < 0.0 && s1 >= 0.0 {
                    let hit = self.prev_position + (p - self.prev_position) * (-s0 / (s1 - s0));
                    let rel = hit - center;
                    let lateral = rel - approach * rel.dot(approach);
                    if lateral.norm() <= aperture / 2.0 && z2.angle(approach) < *angle_tolerance {
                        self.success = true;
                    }
                }
                if self.initial_error > 0.0 {
                    (1.0 - (p - center).norm() / self.initial_error).min(0.99)
                } else {
                    0.0
                }
            }
            ScenarioGeometry::HingeArc {
                hinge,
                radius,
                start_angle,
                span,
                tube,
            } => {
                let rel = p - hinge;
                let rho = rel.xy().norm();
                let in_tube = (rho - radius).abs() <= *tube && rel.z.abs() <= *tube;
                let ang = wrap_angle(rel.y.atan2(rel.x) - start_angle);
                if in_tube && (ang - self.door).abs() <= HINGE_REENGAGE {
                    self.door = self.door.max(ang);
                }
                if self.door >= *span {
                    self.success = true;
                }
                self.door / span
            }
        };
        self.prev_position = p;
        self.last = Progress {
            success: self.success,
            progress: if self.success { 1.0 } else { progress.clamp(0.0, 1.0) },
        };
        self.last
    }
}

/// Success and progress of `scenario` judged from the single pose `ee`.
/// Goalpost crossings need a trajectory; use [`ScenarioTracker`] for those.
pub fn scenario_success(scenario: &TaskScenario, ee: &Pose) -> Progress {
    ScenarioTracker::new(scenario, ee).progress()
}

/// End-effector pose at the nominal start.
pub fn nominal_start_pose(scenario: &TaskScenario, chain: &KinematicChain) -> Result<Pose> {
    ee_pose(chain, &scenario.q0)
}
