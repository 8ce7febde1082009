//! Binary contact labels for feet, hands and hip from height and speed thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionClip;

pub const CONTACT_DIM: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactJoint {
    pub bone: String,
    /// Height above the ground plane (m).
    pub height: f64,
    /// Speed (m/s).
    pub velocity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactConfig {
    /// Left foot, right foot, left hand, right hand, hip.
    pub joints: [ContactJoint; CONTACT_DIM],
    /// Odd median filter width in frames; 1 disables filtering.
    pub median_window: usize,
}

fn joint(bone: &str, height: f64, velocity: f64) -> ContactJoint {
    ContactJoint { bone: bone.into(), height, velocity }
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            joints: [
                joint("LeftToe", 0.05, 0.6),
                joint("RightToe", 0.05, 0.6),
                joint("LeftHand", 0.08, 0.6),
                joint("RightHand", 0.08, 0.6),
                joint("Hips", 0.20, 0.5),
            ],
            median_window: 5,
        }
    }
}

impl ContactConfig {
    /// Same thresholds for every key joint.
    pub fn uniform(height: f64, velocity: f64) -> Self {
        let mut c = Self::default();
        for j in &mut c.joints {
            j.height = height;
            j.velocity = velocity;
        }
        c
    }
}

/// Per-frame labels in [0, 1] for the five key joints.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ContactSeries {
    pub labels: Vec<[f64; CONTACT_DIM]>,
}

impl ContactSeries {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Clamped lookup.
    pub fn at(&self, frame: isize) -> [f64; CONTACT_DIM] {
        let i = frame.clamp(0, self.labels.len() as isize - 1) as usize;
        self.labels[i]
    }
}

pub fn detect_contacts(clip: &MotionClip, cfg: &ContactConfig) -> Result<ContactSeries> {
    for j in &cfg.joints {
        if !(j.height > 0.0 && j.velocity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "contact thresholds for `{}` must be positive",
                j.bone
            )));
        }
    }
    let bones = cfg
        .joints
        .iter()
        .map(|j| clip.skeleton.require(&j.bone))
        .collect::<Result<Vec<_>>>()?;
    let mut labels = vec![[0.0; CONTACT_DIM]; clip.len()];
    for (k, (j, &b)) in cfg.joints.iter().zip(&bones).enumerate() {
        let raw: Vec<bool> = clip
            .frames
            .iter()
            .map(|f| f.positions[b].y < j.height && f.velocities[b].norm() < j.velocity)
            .collect();
        for (f, v) in median_filter(&raw, cfg.median_window).into_iter().enumerate() {
            labels[f][k] = if v { 1.0 } else { 0.0 };
        }
    }
    Ok(ContactSeries { labels })
}

/// Majority vote over a centered window with clamped ends.
fn median_filter(x: &[bool], window: usize) -> Vec<bool> {
    let r = (window.max(1) / 2) as isize;
    let last = x.len() as isize - 1;
    (0..x.len() as isize)
        .map(|i| {
            let ones = (-r..=r).filter(|k| x[(i + k).clamp(0, last) as usize]).count();
            ones as isize > r
        })
        .collect()
}
