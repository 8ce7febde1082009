use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{align_hemisphere, geodesic_angle, slerp, slerp2, Quat, RootTransform, Vec3};
use crate::motion::{Pose, Skeleton, LAFAN1_FPS};

pub use crate::runtime::{end_pose_error, EndPoseError};

/// Keyframe interpolation: frame `k` of `n` uses weight `k / (n + 1)` and
/// blends global positions linearly and global rotations along the shortest arc.
pub fn interp_baseline(start: &Pose, target: &Pose, n: usize) -> Result<Vec<Pose>> {
    if n == 0 {
        return Err(Error::InvalidArgument("interpolation needs at least one frame".into()));
    }
    if start.bone_count() != target.bone_count() {
        return Err(Error::Shape { context: "interpolation bones", expected: start.bone_count(), found: target.bone_count() });
    }
    let span = (n + 1) as f64;
    let velocities: Vec<Vec3> = start.positions.iter().zip(&target.positions).map(|(a, b)| (b - a) * (LAFAN1_FPS / span)).collect();
    Ok((1..=n)
        .map(|k| {
            let t = k as f64 / span;
            Pose {
                positions: start.positions.iter().zip(&target.positions).map(|(a, b)| a + (b - a) * t).collect(),
                rotations: start.rotations.iter().zip(&target.rotations).map(|(a, b)| slerp(a, b, t)).collect(),
                velocities: velocities.clone(),
                root: RootTransform::new(
                    start.root.position + (target.root.position - start.root.position) * t,
                    slerp2(&start.root.forward, &target.root.forward, t),
                ),
            }
        })
        .collect())
}

/// Pose expressed in the ground frame `frame`.
pub fn canonicalize(pose: &Pose, frame: &RootTransform) -> Pose {
    Pose {
        positions: pose.positions.iter().map(|p| frame.to_local_point(p)).collect(),
        rotations: pose.rotations.iter().map(|q| frame.to_local_rot(q)).collect(),
        velocities: pose.velocities.iter().map(|v| frame.to_local_dir(v)).collect(),
        root: frame.relative(&pose.root),
    }
}

/// Per-bone, per-axis position statistics used to standardize L2P.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionNormalizer {
    pub mean: Vec<[f64; 3]>,
    pub std: Vec<[f64; 3]>,
}

impl PositionNormalizer {
    pub fn identity(bones: usize) -> Self {
        Self { mean: vec![[0.0; 3]; bones], std: vec![[1.0; 3]; bones] }
    }

    /// Fit on a set of poses; degenerate axes get unit std.
    pub fn fit<'a>(poses: impl IntoIterator<Item = &'a Pose>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum: Vec<[f64; 3]> = Vec::new();
        let mut sq: Vec<[f64; 3]> = Vec::new();
        for p in poses {
            if sum.is_empty() {
                sum = vec![[0.0; 3]; p.bone_count()];
                sq = vec![[0.0; 3]; p.bone_count()];
            } else if p.bone_count() != sum.len() {
                return Err(Error::Shape { context: "normalizer bones", expected: sum.len(), found: p.bone_count() });
            }
            for (b, v) in p.positions.iter().enumerate() {
                for a in 0..3 {
                    sum[b][a] += v[a];
                    sq[b][a] += v[a] * v[a];
                }
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidArgument("no poses to fit position statistics".into()));
        }
        let nf = n as f64;
        let mean: Vec<[f64; 3]> = sum.iter().map(|s| s.map(|v| v / nf)).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let mut out = [1.0; 3];
                for a in 0..3 {
                    let var = (s[a] / nf - m[a] * m[a]).max(0.0);
                    if var.sqrt() > 1e-8 {
                        out[a] = var.sqrt();
                    }
                }
                out
            })
            .collect();
        Ok(Self { mean, std })
    }

    fn standardized(&self, pose: &Pose) -> Vec<f64> {
        pose.positions
            .iter()
            .enumerate()
            .flat_map(|(b, p)| (0..3).map(move |a| (p[a] - self.mean[b][a]) / self.std[b][a]))
            .collect()
    }
}

fn check_lengths(a: &[Pose], b: &[Pose]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    Ok(())
}

/// Mean over frames of the L2 norm of standardized global position differences.
pub fn l2p(generated: &[Pose], ground_truth: &[Pose], norm: &PositionNormalizer) -> Result<f64> {
    check_lengths(generated, ground_truth)?;
    let mut total = 0.0;
    for (g, t) in generated.iter().zip(ground_truth) {
        if g.bone_count() != norm.mean.len() || t.bone_count() != norm.mean.len() {
            return Err(Error::Shape { context: "l2p bones", expected: norm.mean.len(), found: g.bone_count() });
        }
        let (a, b) = (norm.standardized(g), norm.standardized(t));
        total += a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    }
    Ok(total / generated.len() as f64)
}

/// Mean over frames of the L2 norm of hemisphere-aligned global quaternion differences.
pub fn l2q(generated: &[Pose], ground_truth: &[Pose]) -> Result<f64> {
    check_lengths(generated, ground_truth)?;
    let mut total = 0.0;
    for (g, t) in generated.iter().zip(ground_truth) {
        if g.bone_count() != t.bone_count() {
            return Err(Error::Shape { context: "l2q bones", expected: t.bone_count(), found: g.bone_count() });
        }
        let sq: f64 = g
            .rotations
            .iter()
            .zip(&t.rotations)
            .map(|(a, b)| (align_hemisphere(a, b).quaternion() - b.quaternion()).norm_squared())
            .sum();
        total += sq.sqrt();
    }
    Ok(total / generated.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootSkateConfig {
    /// Bones whose horizontal drift is measured.
    pub feet: Vec<usize>,
    /// Height (m) above `ground` below which a foot counts as planted.
    pub height: f64,
    /// Vertical speed (m/s) below which a foot counts as planted.
    pub vertical_speed: f64,
    pub ground: f64,
    pub fps: f64,
}

impl FootSkateConfig {
    pub fn lafan(skeleton: &Skeleton) -> Result<Self> {
        Ok(Self {
            feet: vec![skeleton.require("LeftToe")?, skeleton.require("RightToe")?],
            height: 0.015,
            vertical_speed: 1.0,
            ground: 0.0,
            fps: LAFAN1_FPS,
        })
    }
}

/// Horizontal foot displacement (cm) summed over feet on planted frames,
/// averaged over the `len - 1` frame steps.
pub fn foot_skate(frames: &[Pose], cfg: &FootSkateConfig) -> f64 {
    if frames.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in frames.windows(2) {
        for &f in &cfg.feet {
            let (a, b) = (w[0].positions[f], w[1].positions[f]);
            let vy = (b.y - a.y) * cfg.fps;
            if b.y - cfg.ground < cfg.height && vy.abs() < cfg.vertical_speed {
                total += ((b.x - a.x).powi(2) + (b.z - a.z).powi(2)).sqrt() * 100.0;
            }
        }
    }
    total / (frames.len() - 1) as f64
}

/// Mean geodesic change of local joint rotations between consecutive frames, in deg/s.
pub fn angular_joint_updates(frames: &[Pose], skeleton: &Skeleton, fps: f64) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::InvalidArgument("angular updates need at least 2 frames".into()));
    }
    let local: Vec<Vec<Quat>> = frames.iter().map(|p| p.local_rotations(skeleton)).collect();
    let joints = skeleton.len() as f64;
    let mut total = 0.0;
    for w in local.windows(2) {
        total += w[0].iter().zip(&w[1]).map(|(a, b)| geodesic_angle(a, b).to_degrees()).sum::<f64>() / joints;
    }
    Ok(total / (frames.len() - 1) as f64 * fps)
}
