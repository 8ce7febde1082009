//! JSON payloads shared by the endpoints, the stream and the store.

use inbetween::math::{Quat, RootTransform, Vec2, Vec3};
use inbetween::motion::Pose;
use inbetween::runtime::EndPoseError;
use nalgebra::Quaternion;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::path::PathSpec;

/// Ground-plane root: position (x, z) and unit facing direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootJson {
    pub position: [f64; 2],
    pub forward: [f64; 2],
}

impl From<&RootTransform> for RootJson {
    fn from(r: &RootTransform) -> Self {
        Self { position: [r.position.x, r.position.y], forward: [r.forward.x, r.forward.y] }
    }
}

impl From<&RootJson> for RootTransform {
    fn from(r: &RootJson) -> Self {
        RootTransform::new(Vec2::new(r.position[0], r.position[1]), Vec2::new(r.forward[0], r.forward[1]))
    }
}

/// Global bone state in meters; rotations are unit quaternions `[w, x, y, z]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub positions: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    /// Derived from the first bone when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<RootJson>,
}

pub fn quat_wxyz(q: &Quat) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        Self {
            positions: p.positions.iter().map(|v| [v.x, v.y, v.z]).collect(),
            rotations: p.rotations.iter().map(quat_wxyz).collect(),
            root: Some(RootJson::from(&p.root)),
        }
    }
}

impl PoseJson {
    /// Core pose at rest (zero velocities).
    pub fn to_pose(&self, bones: usize) -> Result<Pose, ApiError> {
        if self.positions.len() != bones || self.rotations.len() != bones {
            return Err(ApiError::invalid(format!(
                "pose has {} positions and {} rotations, the model expects {bones} bones",
                self.positions.len(),
                self.rotations.len()
            )));
        }
        let mut rotations = Vec::with_capacity(bones);
        for (i, q) in self.rotations.iter().enumerate() {
            let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
            let n = raw.norm();
            if !n.is_finite() || n < 1e-6 {
                return Err(ApiError::invalid(format!("rotation {i} is not a valid quaternion")));
            }
            rotations.push(Quat::from_quaternion(raw));
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ApiError::invalid("pose positions must be finite"));
        }
        let mut pose = Pose {
            positions: self.positions.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            rotations,
            velocities: vec![Vec3::zeros(); bones],
            root: RootTransform::identity(),
        };
        pose.root = match &self.root {
            Some(r) => r.into(),
            None => pose.default_root(),
        };
        Ok(pose)
    }
}

/// A keyframe taken from a loaded clip or given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyframeRef {
    Clip { clip: String, frame: usize },
    Pose { pose: PoseJson },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRequest {
    pub start: KeyframeRef,
    pub target: KeyframeRef,
    /// Seconds; the transition has `ceil(30 * duration)` frames.
    pub duration: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// One generated frame as streamed and stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub index: usize,
    /// Seconds after the start keyframe.
    pub time: f64,
    pub positions: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub root: RootJson,
    pub contacts: Vec<f64>,
    pub lambda: f64,
    /// Phase vector snapshot (two values per channel).
    pub phase: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMetrics {
    /// Mean local rotation change, degrees per second.
    pub angular_updates: f64,
    /// Toe sliding near the ground, cm per frame; absent when the skeleton has no toe bones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foot_skate: Option<f64>,
    /// Mean root distance to the requested path, cm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_deviation_cm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub id: String,
    pub session: String,
    pub model_hash: String,
    pub request: TransitionRequest,
    pub frames: Vec<FrameMessage>,
    pub end_error: EndPoseError,
    pub metrics: TransitionMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub created_at: u64,
}

/// Messages sent on the generation stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Frame(FrameMessage),
    Complete {
        transition: TransitionRecord,
    },
    Error {
        code: String,
        message: String,
        /// Index of the last frame sent before the failure.
        last_index: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub model_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub keyframes: Vec<KeyframeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    pub transitions: Vec<String>,
    /// Unix seconds.
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub keyframes: Vec<KeyframeRef>,
    #[serde(default)]
    pub path: Option<PathSpec>,
}

/// Partial update; absent fields are left unchanged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateSession {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub keyframes: Option<Vec<KeyframeRef>>,
    #[serde(default)]
    pub path: Option<PathSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub name: String,
    pub frames: usize,
    pub fps: f64,
    pub subject: Option<u32>,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPathRequest {
    pub path: PathSpec,
    /// Seconds covered by presets; samples run to the end of the path otherwise.
    pub duration: f64,
    /// Start root for presets; identity when omitted.
    #[serde(default)]
    pub origin: Option<RootJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPathResponse {
    pub control_points: Vec<[f64; 2]>,
    pub samples: Vec<crate::path::PathSample>,
}
