//! Contact-driven two-bone foot IK with locks recorded at contact onset.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{Quat, Vec3};
use crate::motion::{Pose, Skeleton};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FootChain {
    pub hip: String,
    pub knee: String,
    pub ankle: String,
    /// Bones rigidly carried with the ankle.
    pub end: Vec<String>,
    /// Index into the contact vector.
    pub contact: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FootIkConfig {
    pub chains: Vec<FootChain>,
    /// Contact value above which a lock is active.
    pub threshold: f64,
    /// Contact value at which the IK weight reaches 1.
    pub full_weight: f64,
}

impl Default for FootIkConfig {
    fn default() -> Self {
        let chain = |side: &str, contact| FootChain {
            hip: format!("{side}UpLeg"),
            knee: format!("{side}Leg"),
            ankle: format!("{side}Foot"),
            end: vec![format!("{side}Toe")],
            contact,
        };
        Self { chains: vec![chain("Left", 0), chain("Right", 1)], threshold: 0.5, full_weight: 0.75 }
    }
}

struct Chain {
    hip: usize,
    knee: usize,
    ankle: usize,
    end: Vec<usize>,
    contact: usize,
}

/// Foot IK with per-foot lock state.
#[derive(Clone, Debug)]
pub struct FootIk {
    pub cfg: FootIkConfig,
    pub locks: Vec<Option<Vec3>>,
}

fn rotation_between(a: &Vec3, b: &Vec3) -> Quat {
    Quat::rotation_between(a, b).unwrap_or_else(|| {
        // Antiparallel: rotate half a turn about any perpendicular axis.
        let axis = if a.x.abs() < 0.9 { a.cross(&Vec3::x()) } else { a.cross(&Vec3::y()) };
        Quat::from_axis_angle(&nalgebra::Unit::new_normalize(axis), std::f64::consts::PI)
    })
}

/// Analytic two-bone solve. Returns new knee and ankle positions; an
/// unreachable target clamps to full extension along the hip-target ray.
pub fn two_bone(hip: &Vec3, knee: &Vec3, ankle: &Vec3, target: &Vec3) -> (Vec3, Vec3) {
    let l1 = (knee - hip).norm();
    let l2 = (ankle - knee).norm();
    let to = target - hip;
    let dist = to.norm();
    if dist < 1e-9 {
        return (*knee, *ankle);
    }
    let dir = to / dist;
    let d = dist.min(l1 + l2).max((l1 - l2).abs());
    let bend = knee - hip - dir * (knee - hip).dot(&dir);
    let pole = if bend.norm() > 1e-9 {
        bend.normalize()
    } else {
        // Straight leg: bend toward the ankle-to-knee forward side.
        let side = dir.cross(&Vec3::y());
        if side.norm() > 1e-9 { dir.cross(&side).normalize() * -1.0 } else { Vec3::z() }
    };
    let cos_a = ((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0);
    let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
    let new_knee = hip + (dir * cos_a + pole * sin_a) * l1;
    (new_knee, hip + dir * d)
}

impl FootIk {
    pub fn new(cfg: FootIkConfig) -> Self {
        let n = cfg.chains.len();
        Self { cfg, locks: vec![None; n] }
    }

    fn resolve(&self, skeleton: &Skeleton) -> Result<Vec<Chain>> {
        self.cfg
            .chains
            .iter()
            .map(|c| {
                Ok(Chain {
                    hip: skeleton.require(&c.hip)?,
                    knee: skeleton.require(&c.knee)?,
                    ankle: skeleton.require(&c.ankle)?,
                    end: c.end.iter().map(|e| skeleton.require(e)).collect::<Result<_>>()?,
                    contact: c.contact,
                })
            })
            .collect()
    }

    fn weight(&self, contact: f64) -> f64 {
        let span = (self.cfg.full_weight - self.cfg.threshold).max(1e-9);
        ((contact - self.cfg.threshold) / span).clamp(0.0, 1.0)
    }

    /// Update locks from `contacts` and pin locked feet in place.
    pub fn apply(&mut self, skeleton: &Skeleton, pose: &mut Pose, contacts: &[f64]) -> Result<()> {
        let chains = self.resolve(skeleton)?;
        for (i, ch) in chains.iter().enumerate() {
            let c = contacts.get(ch.contact).copied().unwrap_or(0.0);
            if c <= self.cfg.threshold {
                self.locks[i] = None;
                continue;
            }
            let lock = *self.locks[i].get_or_insert(pose.positions[ch.ankle]);
            let w = self.weight(c);
            let target = pose.positions[ch.ankle] * (1.0 - w) + lock * w;
            solve_chain(pose, ch, &target);
        }
        Ok(())
    }
}

fn solve_chain(pose: &mut Pose, ch: &Chain, target: &Vec3) {
    let (a, b, c) = (pose.positions[ch.hip], pose.positions[ch.knee], pose.positions[ch.ankle]);
    let (nb, nc) = two_bone(&a, &b, &c, target);
    let r1 = rotation_between(&(b - a), &(nb - a));
    let moved_c = a + r1 * (c - a);
    let r2 = rotation_between(&(moved_c - nb), &(nc - nb));
    pose.rotations[ch.hip] = r1 * pose.rotations[ch.hip];
    pose.rotations[ch.knee] = r2 * r1 * pose.rotations[ch.knee];
    pose.positions[ch.knee] = nb;
    let shift = nc - c;
    pose.positions[ch.ankle] = nc;
    for &e in &ch.end {
        pose.positions[e] += shift;
    }
}
