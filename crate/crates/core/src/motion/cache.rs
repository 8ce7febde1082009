//! Binary clip cache: JSON header, then float32 LE arrays in declared order.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{MotionClip, Pose, Skeleton};
use crate::binio::{read_f32s, read_framed, write_f32s, write_framed, ArraySpec};
use crate::error::{Error, Result};
use crate::math::{RootTransform, Vec2, Vec3};

pub const CLIP_FORMAT: &str = "inbetween-clip";
pub const CLIP_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ClipHeader {
    pub format: String,
    pub version: u32,
    pub endianness: String,
    pub name: String,
    pub subject: Option<u32>,
    pub fps: f64,
    pub frame_count: usize,
    pub skeleton: Skeleton,
    pub arrays: Vec<ArraySpec>,
}

fn array_layout(frames: usize, bones: usize) -> Vec<ArraySpec> {
    vec![
        ArraySpec::new("positions", &[frames, bones, 3]),
        // quaternion (w, x, y, z)
        ArraySpec::new("rotations", &[frames, bones, 4]),
        ArraySpec::new("velocities", &[frames, bones, 3]),
        // root position (x, z) and forward (x, z)
        ArraySpec::new("roots", &[frames, 4]),
    ]
}

pub fn write_clip_cache(clip: &MotionClip, path: impl AsRef<Path>) -> Result<()> {
    let header = ClipHeader {
        format: CLIP_FORMAT.into(),
        version: CLIP_VERSION,
        endianness: "LE".into(),
        name: clip.name.clone(),
        subject: clip.subject,
        fps: clip.fps,
        frame_count: clip.len(),
        skeleton: clip.skeleton.clone(),
        arrays: array_layout(clip.len(), clip.skeleton.len()),
    };
    write_framed(path, &header, |out| {
        let f = &clip.frames;
        write_f32s(out, f.iter().flat_map(|p| p.positions.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])))?;
        write_f32s(
            out,
            f.iter().flat_map(|p| {
                p.rotations.iter().flat_map(|q| {
                    let q = q.quaternion();
                    [q.w as f32, q.i as f32, q.j as f32, q.k as f32]
                })
            }),
        )?;
        write_f32s(out, f.iter().flat_map(|p| p.velocities.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])))?;
        write_f32s(
            out,
            f.iter().flat_map(|p| {
                let r = &p.root;
                [r.position.x as f32, r.position.y as f32, r.forward.x as f32, r.forward.y as f32]
            }),
        )
    })
}

pub fn read_clip_cache(path: impl AsRef<Path>) -> Result<MotionClip> {
    let (h, mut r): (ClipHeader, _) = read_framed(path)?;
    if h.format != CLIP_FORMAT || h.endianness != "LE" {
        return Err(Error::Format(format!("not a little-endian clip cache: {}", h.format)));
    }
    if h.version != CLIP_VERSION {
        return Err(Error::Format(format!("unsupported clip cache version {}", h.version)));
    }
    let (n, b) = (h.frame_count, h.skeleton.len());
    if h.arrays != array_layout(n, b) {
        return Err(Error::Format("unexpected array layout".into()));
    }
    let pos = read_f32s(&mut r, n * b * 3)?;
    let rot = read_f32s(&mut r, n * b * 4)?;
    let vel = read_f32s(&mut r, n * b * 3)?;
    let roots = read_f32s(&mut r, n * 4)?;
    let v3 = |a: &[f32], i: usize| Vec3::new(a[3 * i] as f64, a[3 * i + 1] as f64, a[3 * i + 2] as f64);
    let frames = (0..n)
        .map(|f| Pose {
            positions: (0..b).map(|j| v3(&pos, f * b + j)).collect(),
            rotations: (0..b)
                .map(|j| {
                    let k = 4 * (f * b + j);
                    UnitQuaternion::new_normalize(Quaternion::new(
                        rot[k] as f64,
                        rot[k + 1] as f64,
                        rot[k + 2] as f64,
                        rot[k + 3] as f64,
                    ))
                })
                .collect(),
            velocities: (0..b).map(|j| v3(&vel, f * b + j)).collect(),
            root: RootTransform::new(
                Vec2::new(roots[4 * f] as f64, roots[4 * f + 1] as f64),
                Vec2::new(roots[4 * f + 2] as f64, roots[4 * f + 3] as f64),
            ),
        })
        .collect();
    let mut clip = MotionClip::new(h.name, h.skeleton, h.fps, frames)?;
    clip.subject = h.subject;
    Ok(clip)
}
