//! Network input and output vectors: named layouts and typed views.

use serde::{Deserialize, Serialize};

use super::contacts::CONTACT_DIM;
use super::trajectory::TrajPoint;
use super::window::{HALF_SAMPLES, TRAJ_SAMPLES};
use crate::error::{Error, Result};
use crate::math::{decode_rotation, encode_rotation, Quat, RootTransform, Vec3};
use crate::motion::Pose;

/// Sizes that determine every vector width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub bones: usize,
    pub channels: usize,
    pub style: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self::lafan(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub slices: Vec<Slice>,
    pub width: usize,
}

impl Layout {
    fn build(parts: &[(&str, usize)]) -> Self {
        let mut offset = 0;
        let slices = parts
            .iter()
            .filter(|(_, len)| *len > 0)
            .map(|&(name, len)| {
                let s = Slice { name: name.into(), offset, len };
                offset += len;
                s
            })
            .collect();
        Self { slices, width: offset }
    }

    pub fn get(&self, name: &str) -> Option<&Slice> {
        self.slices.iter().find(|s| s.name == name)
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        match self.get(name) {
            Some(s) => s.offset..s.offset + s.len,
            None => 0..0,
        }
    }
}

/// Floats per input trajectory sample: position, direction, velocity, time delta.
const INPUT_TRAJ: usize = 7;
/// Floats per output trajectory sample.
const OUTPUT_TRAJ: usize = 6;

impl Dims {
    pub fn lafan(style: usize) -> Self {
        Self { bones: 22, channels: 5, style }
    }

    fn pose_width(&self, velocities: bool) -> usize {
        self.bones * if velocities { 12 } else { 9 }
    }

    pub fn input_layout(&self) -> Layout {
        Layout::build(&[
            ("trajectory", TRAJ_SAMPLES * INPUT_TRAJ),
            ("state", self.pose_width(true)),
            ("target", self.pose_width(false)),
            ("contacts", HALF_SAMPLES * CONTACT_DIM),
            ("style", self.style),
        ])
    }

    pub fn gating_layout(&self) -> Layout {
        Layout::build(&[("phases", TRAJ_SAMPLES * 2 * self.channels)])
    }

    pub fn output_layout(&self) -> Layout {
        Layout::build(&[
            ("trajectory", HALF_SAMPLES * OUTPUT_TRAJ),
            ("target_trajectory", HALF_SAMPLES * OUTPUT_TRAJ),
            ("pose", self.pose_width(true)),
            ("target_pose", self.pose_width(true)),
            ("contacts", CONTACT_DIM),
            ("phases", HALF_SAMPLES * 2 * self.channels),
            ("phase_frequencies", HALF_SAMPLES * self.channels),
            ("phase_amplitudes", HALF_SAMPLES * self.channels),
        ])
    }

    pub fn input_width(&self) -> usize {
        self.input_layout().width
    }

    pub fn gating_width(&self) -> usize {
        self.gating_layout().width
    }

    pub fn output_width(&self) -> usize {
        self.output_layout().width
    }
}

/// Bone positions, forward/up rotation pairs and velocities in some frame.
/// Flattened block-wise: all positions, all rotations, then all velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseFeatures {
    pub positions: Vec<Vec3>,
    pub rotations: Vec<[f64; 6]>,
    /// Empty for target states.
    pub velocities: Vec<Vec3>,
}

impl PoseFeatures {
    fn write(&self, out: &mut Vec<f64>) {
        for p in &self.positions {
            out.extend_from_slice(p.as_slice());
        }
        for r in &self.rotations {
            out.extend_from_slice(r);
        }
        for v in &self.velocities {
            out.extend_from_slice(v.as_slice());
        }
    }

    fn read(v: &[f64], bones: usize, velocities: bool) -> Self {
        let v3 = |o: usize| Vec3::new(v[o], v[o + 1], v[o + 2]);
        let rot0 = 3 * bones;
        let vel0 = 9 * bones;
        Self {
            positions: (0..bones).map(|b| v3(3 * b)).collect(),
            rotations: (0..bones)
                .map(|b| v[rot0 + 6 * b..rot0 + 6 * b + 6].try_into().unwrap())
                .collect(),
            velocities: if velocities {
                (0..bones).map(|b| v3(vel0 + 3 * b)).collect()
            } else {
                Vec::new()
            },
        }
    }

    /// Encode a world pose relative to a root frame.
    pub fn encode(pose: &Pose, frame: &RootTransform, velocities: bool) -> Self {
        Self {
            positions: pose.positions.iter().map(|p| frame.to_local_point(p)).collect(),
            rotations: pose
                .rotations
                .iter()
                .map(|q| encode_rotation(&frame.to_local_rot(q)))
                .collect(),
            velocities: if velocities {
                pose.velocities.iter().map(|v| frame.to_local_dir(v)).collect()
            } else {
                Vec::new()
            },
        }
    }

    /// Encode a world pose in the semi-joint frames of `target`: each bone
    /// is centered on the target's bone and oriented by the target's root.
    pub fn encode_semi_joint(pose: &Pose, target: &Pose, target_root: &RootTransform) -> Self {
        let inv = target_root.rotation().inverse();
        Self {
            positions: pose
                .positions
                .iter()
                .zip(&target.positions)
                .map(|(p, t)| inv * (p - t))
                .collect(),
            rotations: pose.rotations.iter().map(|q| encode_rotation(&(inv * q))).collect(),
            velocities: pose.velocities.iter().map(|v| inv * v).collect(),
        }
    }

    /// World positions, rotations and velocities from root-frame features.
    pub fn decode(&self, frame: &RootTransform) -> Result<(Vec<Vec3>, Vec<Quat>, Vec<Vec3>)> {
        let pos = self.positions.iter().map(|p| frame.to_world_point(p)).collect();
        let rot = self
            .rotations
            .iter()
            .map(|r| decode_rotation(r).map(|q| frame.to_world_rot(&q)))
            .collect::<Result<_>>()?;
        let vel = self.velocities.iter().map(|v| frame.to_world_dir(v)).collect();
        Ok((pos, rot, vel))
    }

    /// Inverse of [`encode_semi_joint`](Self::encode_semi_joint).
    pub fn decode_semi_joint(
        &self,
        target: &Pose,
        target_root: &RootTransform,
    ) -> Result<(Vec<Vec3>, Vec<Quat>, Vec<Vec3>)> {
        let r = target_root.rotation();
        let pos = self
            .positions
            .iter()
            .zip(&target.positions)
            .map(|(p, t)| t + r * p)
            .collect();
        let rot = self
            .rotations
            .iter()
            .map(|v| decode_rotation(v).map(|q| r * q))
            .collect::<Result<_>>()?;
        let vel = self.velocities.iter().map(|v| r * v).collect();
        Ok((pos, rot, vel))
    }
}

/// Network input at frame `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    /// 13 samples over [-1 s, +1 s] in the target root frame.
    pub trajectory: Vec<TrajPoint>,
    /// Remaining time (s) to the target at each trajectory sample.
    pub time_deltas: Vec<f64>,
    /// Current pose in the current root frame.
    pub state: PoseFeatures,
    /// Target pose (positions and rotations) in the current root frame.
    pub target: PoseFeatures,
    /// 7 past contact samples over [-1 s, 0 s].
    pub contacts: Vec<[f64; CONTACT_DIM]>,
    /// 13 manifold samples, `2C` floats each, fed to the gating network.
    pub phases: Vec<f64>,
    pub style: Vec<f64>,
}

impl InputVector {
    /// Motion-network input (everything except phases).
    pub fn motion(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (t, d) in self.trajectory.iter().zip(&self.time_deltas) {
            out.extend_from_slice(&t.to_array());
            out.push(*d);
        }
        self.state.write(&mut out);
        self.target.write(&mut out);
        for c in &self.contacts {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(&self.style);
        out
    }

    pub fn gating(&self) -> Vec<f64> {
        self.phases.clone()
    }

    pub fn from_vectors(dims: &Dims, motion: &[f64], gating: &[f64]) -> Result<Self> {
        let layout = dims.input_layout();
        check_width("motion input", layout.width, motion.len())?;
        check_width("gating input", dims.gating_width(), gating.len())?;
        let traj = &motion[layout.range("trajectory")];
        Ok(Self {
            trajectory: traj.chunks(INPUT_TRAJ).map(TrajPoint::from_slice).collect(),
            time_deltas: traj.chunks(INPUT_TRAJ).map(|c| c[6]).collect(),
            state: PoseFeatures::read(&motion[layout.range("state")], dims.bones, true),
            target: PoseFeatures::read(&motion[layout.range("target")], dims.bones, false),
            contacts: motion[layout.range("contacts")]
                .chunks(CONTACT_DIM)
                .map(|c| c.try_into().unwrap())
                .collect(),
            phases: gating.to_vec(),
            style: motion[layout.range("style")].to_vec(),
        })
    }
}

/// Network output for frame `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputVector {
    /// 7 future samples in the frame-`i` root frame.
    pub trajectory: Vec<TrajPoint>,
    /// The same samples in the target root frame.
    pub target_trajectory: Vec<TrajPoint>,
    /// Next pose in the frame-`i` root frame.
    pub pose: PoseFeatures,
    /// Next pose in the target semi-joint frames.
    pub target_pose: PoseFeatures,
    pub contacts: [f64; CONTACT_DIM],
    /// 7 future manifold samples, `2C` floats each.
    pub phases: Vec<f64>,
    /// 7 future frequency samples, `C` floats each.
    pub frequencies: Vec<f64>,
    /// 7 future amplitude samples, `C` floats each.
    pub amplitudes: Vec<f64>,
}

impl OutputVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.trajectory.iter().chain(&self.target_trajectory) {
            out.extend_from_slice(&t.to_array());
        }
        self.pose.write(&mut out);
        self.target_pose.write(&mut out);
        out.extend_from_slice(&self.contacts);
        out.extend_from_slice(&self.phases);
        out.extend_from_slice(&self.frequencies);
        out.extend_from_slice(&self.amplitudes);
        out
    }

    pub fn from_slice(dims: &Dims, v: &[f64]) -> Result<Self> {
        let layout = dims.output_layout();
        check_width("output", layout.width, v.len())?;
        let traj = |name: &str| -> Vec<TrajPoint> {
            v[layout.range(name)].chunks(OUTPUT_TRAJ).map(TrajPoint::from_slice).collect()
        };
        Ok(Self {
            trajectory: traj("trajectory"),
            target_trajectory: traj("target_trajectory"),
            pose: PoseFeatures::read(&v[layout.range("pose")], dims.bones, true),
            target_pose: PoseFeatures::read(&v[layout.range("target_pose")], dims.bones, true),
            contacts: v[layout.range("contacts")].try_into().unwrap(),
            phases: v[layout.range("phases")].to_vec(),
            frequencies: v[layout.range("phase_frequencies")].to_vec(),
            amplitudes: v[layout.range("phase_amplitudes")].to_vec(),
        })
    }
}

fn check_width(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape { context, expected, found });
    }
    Ok(())
}
