//! Horizontal root trajectory: ground-projected hips with a smoothed facing
//! direction derived from the hip and shoulder lateral axes.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{RootTransform, Vec2, Vec3, UP};
use crate::motion::{finite_difference, MotionClip};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootConfig {
    pub hips: String,
    pub left_hip: String,
    pub right_hip: String,
    pub left_shoulder: String,
    pub right_shoulder: String,
    /// Gaussian standard deviation (frames) for smoothing the facing direction.
    pub sigma: f64,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            hips: "Hips".into(),
            left_hip: "LeftUpLeg".into(),
            right_hip: "RightUpLeg".into(),
            left_shoulder: "LeftShoulder".into(),
            right_shoulder: "RightShoulder".into(),
            sigma: 3.0,
        }
    }
}

/// One trajectory sample in whatever space its owner declares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub position: Vec2,
    pub forward: Vec2,
    pub velocity: Vec2,
}

impl TrajPoint {
    pub fn root(&self) -> RootTransform {
        RootTransform::new(self.position, self.forward)
    }

    pub fn to_local(&self, frame: &RootTransform) -> TrajPoint {
        TrajPoint {
            position: frame.to_local_point2(&self.position),
            forward: frame.to_local_dir2(&self.forward),
            velocity: frame.to_local_dir2(&self.velocity),
        }
    }

    pub fn to_world(&self, frame: &RootTransform) -> TrajPoint {
        TrajPoint {
            position: frame.to_world_point2(&self.position),
            forward: frame.to_world_dir2(&self.forward),
            velocity: frame.to_world_dir2(&self.velocity),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.forward.x,
            self.forward.y,
            self.velocity.x,
            self.velocity.y,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            position: Vec2::new(v[0], v[1]),
            forward: Vec2::new(v[2], v[3]),
            velocity: Vec2::new(v[4], v[5]),
        }
    }
}

/// Per-frame world-space root trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootTrajectory {
    pub points: Vec<TrajPoint>,
}

impl RootTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transforms(&self) -> Vec<RootTransform> {
        self.points.iter().map(TrajPoint::root).collect()
    }

    /// Sample at `frame`, clamping to the ends. Out-of-range samples hold
    /// the boundary position with zero velocity.
    pub fn sample(&self, frame: isize) -> TrajPoint {
        let last = self.points.len() as isize - 1;
        let i = frame.clamp(0, last) as usize;
        let mut p = self.points[i];
        if frame < 0 || frame > last {
            p.velocity = Vec2::zeros();
        }
        p
    }
}

pub fn compute_root_trajectory(clip: &MotionClip, cfg: &RootConfig) -> Result<RootTrajectory> {
    let s = &clip.skeleton;
    let hips = s.require(&cfg.hips)?;
    let (lh, rh) = (s.require(&cfg.left_hip)?, s.require(&cfg.right_hip)?);
    let (ls, rs) = (s.require(&cfg.left_shoulder)?, s.require(&cfg.right_shoulder)?);

    let positions: Vec<Vec2> = clip
        .frames
        .iter()
        .map(|f| Vec2::new(f.positions[hips].x, f.positions[hips].z))
        .collect();
    let raw: Vec<Vec2> = clip
        .frames
        .iter()
        .map(|f| {
            let p = &f.positions;
            let across: Vec3 = (p[lh] - p[rh]) + (p[ls] - p[rs]);
            let fwd = across.cross(&UP);
            Vec2::new(fwd.x, fwd.z)
        })
        .collect();
    let forwards = gaussian_smooth(&raw, cfg.sigma);
    let velocities = finite_difference(&positions, clip.fps);

    let points = positions
        .into_iter()
        .zip(forwards)
        .zip(velocities)
        .map(|((position, f), velocity)| {
            let forward = if f.norm() > 1e-9 { f.normalize() } else { Vec2::new(0.0, 1.0) };
            TrajPoint { position, forward, velocity }
        })
        .collect();
    Ok(RootTrajectory { points })
}

/// Gaussian filter with clamped boundaries.
/// Compute the clip trajectory and store it as every frame's root.
pub fn assign_roots(clip: &mut MotionClip, cfg: &RootConfig) -> Result<RootTrajectory> {
    let t = compute_root_trajectory(clip, cfg)?;
    clip.set_roots(&t.transforms());
    Ok(t)
}

pub fn gaussian_smooth(values: &[Vec2], sigma: f64) -> Vec<Vec2> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let last = values.len() as isize - 1;
    (0..values.len() as isize)
        .map(|i| {
            let mut acc = Vec2::zeros();
            let mut w = 0.0;
            for (k, kw) in (-radius..=radius).zip(&kernel) {
                acc += values[(i + k).clamp(0, last) as usize] * *kw;
                w += kw;
            }
            acc / w
        })
        .collect()
}
