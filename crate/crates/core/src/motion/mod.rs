//! Skeletal motion capture data: skeletons, poses, clips, BVH I/O,
//! mirroring, dataset splitting and the binary clip cache.

pub mod bvh;
pub mod cache;
pub mod mirror;
pub mod split;

use std::ops::{Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Quat, RootTransform, Vec2, Vec3, FORWARD};

pub use bvh::{load_bvh_dir, parse_bvh, parse_bvh_str, write_bvh, write_bvh_string, BvhOptions};
pub use mirror::mirror_clip;
pub use split::split_dataset;

/// Frame rate of the LaFAN1 captures.
pub const LAFAN1_FPS: f64 = 30.0;
/// Bone count of the LaFAN1 character.
pub const LAFAN1_BONES: usize = 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bone {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest offset from the parent joint, meters.
    pub offset: Vec3,
}

/// Topologically sorted bone hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    bones: Vec<Bone>,
}

impl Skeleton {
    pub fn new(bones: Vec<Bone>) -> Result<Self> {
        if bones.is_empty() {
            return Err(Error::InvalidArgument("skeleton has no bones".into()));
        }
        if bones[0].parent.is_some() {
            return Err(Error::InvalidArgument("bone 0 must be the root".into()));
        }
        for (i, b) in bones.iter().enumerate().skip(1) {
            match b.parent {
                Some(p) if p < i => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "bone `{}` must have a parent with a smaller index",
                        b.name
                    )))
                }
            }
        }
        Ok(Self { bones })
    }

    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    pub fn len(&self) -> usize {
        self.bones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bones.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.bones.iter().position(|b| b.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::MissingBone(name.to_string()))
    }

    pub fn parent(&self, bone: usize) -> Option<usize> {
        self.bones[bone].parent
    }

    pub(crate) fn bones_mut(&mut self) -> &mut [Bone] {
        &mut self.bones
    }

    /// Left/right pairing: `map[i]` is the bone mirrored onto bone `i`.
    pub fn mirror_map(&self) -> Result<Vec<usize>> {
        let mut map = Vec::with_capacity(self.len());
        for b in &self.bones {
            let other = if b.name.contains("Left") {
                let n = b.name.replacen("Left", "Right", 1);
                self.index_of(&n)
                    .ok_or_else(|| Error::MirrorPairing(b.name.clone()))?
            } else if b.name.contains("Right") {
                let n = b.name.replacen("Right", "Left", 1);
                self.index_of(&n)
                    .ok_or_else(|| Error::MirrorPairing(b.name.clone()))?
            } else {
                self.index_of(&b.name).unwrap()
            };
            map.push(other);
        }
        Ok(map)
    }

    /// Global positions and rotations from a root position and local rotations.
    pub fn forward_kinematics(&self, root_position: &Vec3, local: &[Quat]) -> (Vec<Vec3>, Vec<Quat>) {
        self.forward_kinematics_with(root_position, local, |i| self.bones[i].offset)
    }

    pub(crate) fn forward_kinematics_with(
        &self,
        root_position: &Vec3,
        local: &[Quat],
        translation: impl Fn(usize) -> Vec3,
    ) -> (Vec<Vec3>, Vec<Quat>) {
        let n = self.len();
        let mut pos = Vec::with_capacity(n);
        let mut rot = Vec::with_capacity(n);
        for i in 0..n {
            match self.bones[i].parent {
                None => {
                    pos.push(*root_position);
                    rot.push(local[i]);
                }
                Some(p) => {
                    let r: Quat = rot[p];
                    pos.push(pos[p] + r * translation(i));
                    rot.push(r * local[i]);
                }
            }
        }
        (pos, rot)
    }
}

/// One frame of global bone state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub positions: Vec<Vec3>,
    pub rotations: Vec<Quat>,
    pub velocities: Vec<Vec3>,
    pub root: RootTransform,
}

impl Pose {
    /// Pose from forward kinematics with zero velocities and a root derived from bone 0.
    pub fn from_local(skeleton: &Skeleton, root_position: &Vec3, local: &[Quat]) -> Self {
        let (positions, rotations) = skeleton.forward_kinematics(root_position, local);
        let n = positions.len();
        let mut pose = Self {
            positions,
            rotations,
            velocities: vec![Vec3::zeros(); n],
            root: RootTransform::identity(),
        };
        pose.root = pose.default_root();
        pose
    }

    pub fn bone_count(&self) -> usize {
        self.positions.len()
    }

    pub fn local_rotations(&self, skeleton: &Skeleton) -> Vec<Quat> {
        (0..self.rotations.len())
            .map(|i| match skeleton.parent(i) {
                None => self.rotations[i],
                Some(p) => self.rotations[p].inverse() * self.rotations[i],
            })
            .collect()
    }

    /// Recompute positions from rotations and the root joint position using rest offsets.
    pub fn refresh_positions(&mut self, skeleton: &Skeleton) {
        let local = self.local_rotations(skeleton);
        let (p, r) = skeleton.forward_kinematics(&self.positions[0], &local);
        self.positions = p;
        self.rotations = r;
    }

    /// Ground projection of bone 0 facing along its rotated forward axis.
    pub fn default_root(&self) -> RootTransform {
        let p = self.positions[0];
        let f = self.rotations[0] * FORWARD;
        RootTransform::new(Vec2::new(p.x, p.z), Vec2::new(f.x, f.z))
    }
}

/// A contiguous motion capture sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MotionClip {
    pub name: String,
    pub subject: Option<u32>,
    pub skeleton: Skeleton,
    pub fps: f64,
    pub frames: Vec<Pose>,
}

impl MotionClip {
    pub fn new(name: impl Into<String>, skeleton: Skeleton, fps: f64, frames: Vec<Pose>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a clip needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(fps > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid frame rate {fps}")));
        }
        if let Some(f) = frames.iter().find(|f| f.bone_count() != skeleton.len()) {
            return Err(Error::Shape {
                context: "pose bone count",
                expected: skeleton.len(),
                found: f.bone_count(),
            });
        }
        let name = name.into();
        let subject = subject_from_name(&name);
        Ok(Self {
            name,
            subject,
            skeleton,
            fps,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Clamped frame lookup.
    pub fn frame(&self, index: isize) -> &Pose {
        let i = index.clamp(0, self.frames.len() as isize - 1) as usize;
        &self.frames[i]
    }

    /// Finite-difference bone velocities from positions.
    pub fn recompute_velocities(&mut self) {
        let bones = self.skeleton.len();
        for b in 0..bones {
            let series: Vec<Vec3> = self.frames.iter().map(|f| f.positions[b]).collect();
            let vel = finite_difference(&series, self.fps);
            for (f, v) in self.frames.iter_mut().zip(vel) {
                f.velocities[b] = v;
            }
        }
    }

    pub fn set_roots(&mut self, roots: &[RootTransform]) {
        for (f, r) in self.frames.iter_mut().zip(roots) {
            f.root = *r;
        }
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 / self.fps
    }
}

/// Central differences in the interior, forward at the first sample and
/// backward at the last, scaled by `fps`.
pub fn finite_difference<T>(values: &[T], fps: f64) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < 2 {
        return values.iter().map(|v| (*v - *v) * fps).collect();
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) * fps
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) * fps
            } else {
                (values[i + 1] - values[i - 1]) * (0.5 * fps)
            }
        })
        .collect()
}

/// `walk1_subject3` → `Some(3)`.
pub fn subject_from_name(name: &str) -> Option<u32> {
    let lower = name.to_ascii_lowercase();
    let idx = lower.rfind("subject")?;
    let digits: String = lower[idx + 7..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}
