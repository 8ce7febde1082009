//! BVH reader and writer.
//!
//! Position channels, when present on a joint, replace its rest offset for
//! that frame. Rotation channels compose in the order they are listed.
//! Distances are scaled by [`BvhOptions::scale`] (centimeters to meters by
//! default).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};

use super::{Bone, MotionClip, Pose, Skeleton};
use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};

#[derive(Clone, Copy, Debug)]
pub struct BvhOptions {
    /// Multiplier applied to every distance in the file.
    pub scale: f64,
}

impl Default for BvhOptions {
    fn default() -> Self {
        Self { scale: 0.01 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Channel {
    PosX,
    PosY,
    PosZ,
    RotX,
    RotY,
    RotZ,
}

impl Channel {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "xposition" => Self::PosX,
            "yposition" => Self::PosY,
            "zposition" => Self::PosZ,
            "xrotation" => Self::RotX,
            "yrotation" => Self::RotY,
            "zrotation" => Self::RotZ,
            _ => return None,
        })
    }
}

struct Joint {
    name: String,
    parent: Option<usize>,
    offset: Vec3,
    channels: Vec<Channel>,
}

struct Tokens<'a> {
    path: PathBuf,
    items: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(path: PathBuf, text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (t, i + 1)))
            .collect();
        Self { path, items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or_else(|| self.items.last())
            .map(|t| t.1)
            .unwrap_or(0)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.0)
    }

    fn next(&mut self) -> Result<&'a str> {
        let t = self
            .items
            .get(self.pos)
            .map(|t| t.0)
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t.eq_ignore_ascii_case(word) {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected `{word}`, found `{t}`")))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let t = self.next()?;
        t.parse::<f64>().map_err(|_| {
            self.pos -= 1;
            self.err(format!("expected a number, found `{t}`"))
        })
    }
}

pub fn parse_bvh(path: impl AsRef<Path>, options: &BvhOptions) -> Result<MotionClip> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_inner(path.to_path_buf(), &name, &text, options)
}

/// Parse every `.bvh` file in `dir`, sorted by file name.
pub fn load_bvh_dir(dir: impl AsRef<Path>, options: &BvhOptions) -> Result<Vec<MotionClip>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("bvh")))
        .collect();
    paths.sort();
    paths.iter().map(|p| parse_bvh(p, options)).collect()
}

pub fn parse_bvh_str(name: &str, text: &str, options: &BvhOptions) -> Result<MotionClip> {
    parse_inner(PathBuf::from(name), name, text, options)
}

fn parse_inner(path: PathBuf, name: &str, text: &str, options: &BvhOptions) -> Result<MotionClip> {
    let mut tok = Tokens::new(path, text);
    tok.expect("HIERARCHY")?;
    tok.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut tok, None, &mut joints, options.scale)?;
    tok.expect("MOTION")?;
    tok.expect("Frames:")?;
    let declared = tok.number()?;
    if declared < 0.0 || declared.fract() != 0.0 {
        return Err(tok.err("frame count must be a non-negative integer"));
    }
    let declared = declared as usize;
    tok.expect("Frame")?;
    tok.expect("Time:")?;
    let frame_time = tok.number()?;
    if !(frame_time > 0.0) {
        return Err(tok.err("frame time must be positive"));
    }
    let mut fps = 1.0 / frame_time;
    if (fps - fps.round()).abs() < 1e-2 {
        fps = fps.round();
    }

    let stride: usize = joints.iter().map(|j| j.channels.len()).sum();
    let first_data_line = tok.items.get(tok.pos).map(|t| t.1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut current_line = first_data_line;
    let mut row = Vec::with_capacity(stride);
    while let Some(t) = tok.peek() {
        let line = tok.items[tok.pos].1;
        if Some(line) != current_line {
            if row.len() != stride {
                return Err(Error::Parse {
                    path: tok.path.clone(),
                    line: current_line.unwrap_or(line),
                    message: format!("expected {stride} channel values, found {}", row.len()),
                });
            }
            rows.push(std::mem::take(&mut row));
            current_line = Some(line);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| tok.err(format!("expected a number, found `{t}`")))?;
        row.push(v);
        tok.pos += 1;
    }
    if !row.is_empty() {
        if row.len() != stride {
            return Err(Error::Parse {
                path: tok.path.clone(),
                line: current_line.unwrap_or(0),
                message: format!("expected {stride} channel values, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != declared {
        return Err(Error::FrameCount {
            expected: declared,
            found: rows.len(),
        });
    }

    let skeleton = Skeleton::new(
        joints
            .iter()
            .map(|j| Bone {
                name: j.name.clone(),
                parent: j.parent,
                offset: j.offset,
            })
            .collect(),
    )?;

    let frames = rows
        .iter()
        .map(|r| frame_pose(&skeleton, &joints, r, options.scale))
        .collect();
    let mut clip = MotionClip::new(name, skeleton, fps, frames)?;
    clip.recompute_velocities();
    Ok(clip)
}

fn parse_joint(tok: &mut Tokens<'_>, parent: Option<usize>, joints: &mut Vec<Joint>, scale: f64) -> Result<()> {
    let name = tok.next()?.to_string();
    tok.expect("{")?;
    tok.expect("OFFSET")?;
    let offset = Vector3::new(tok.number()?, tok.number()?, tok.number()?) * scale;
    let mut channels = Vec::new();
    if tok.peek().is_some_and(|t| t.eq_ignore_ascii_case("CHANNELS")) {
        tok.next()?;
        let n = tok.number()?;
        if !(0.0..=6.0).contains(&n) || n.fract() != 0.0 {
            return Err(tok.err("channel count must be between 0 and 6"));
        }
        for _ in 0..n as usize {
            let c = tok.next()?;
            let ch = Channel::parse(c).ok_or_else(|| {
                tok.pos -= 1;
                tok.err(format!("unknown channel `{c}`"))
            })?;
            channels.push(ch);
        }
    }
    let index = joints.len();
    joints.push(Joint {
        name,
        parent,
        offset,
        channels,
    });
    loop {
        match tok.peek() {
            Some(t) if t.eq_ignore_ascii_case("JOINT") => {
                tok.next()?;
                parse_joint(tok, Some(index), joints, scale)?;
            }
            Some(t) if t.eq_ignore_ascii_case("End") => {
                tok.next()?;
                tok.expect("Site")?;
                tok.expect("{")?;
                tok.expect("OFFSET")?;
                for _ in 0..3 {
                    tok.number()?;
                }
                tok.expect("}")?;
            }
            Some("}") => {
                tok.next()?;
                return Ok(());
            }
            Some(t) => return Err(tok.err(format!("unexpected token `{t}` in joint block"))),
            None => return Err(tok.err("unterminated joint block")),
        }
    }
}

fn frame_pose(skeleton: &Skeleton, joints: &[Joint], row: &[f64], scale: f64) -> Pose {
    let mut local = Vec::with_capacity(joints.len());
    let mut translations = Vec::with_capacity(joints.len());
    let mut cursor = 0;
    for j in joints {
        let mut t = j.offset;
        let mut q: Quat = UnitQuaternion::identity();
        for ch in &j.channels {
            let v = row[cursor];
            cursor += 1;
            match ch {
                Channel::PosX => t.x = v * scale,
                Channel::PosY => t.y = v * scale,
                Channel::PosZ => t.z = v * scale,
                Channel::RotX => q *= UnitQuaternion::from_axis_angle(&Vector3::x_axis(), v.to_radians()),
                Channel::RotY => q *= UnitQuaternion::from_axis_angle(&Vector3::y_axis(), v.to_radians()),
                Channel::RotZ => q *= UnitQuaternion::from_axis_angle(&Vector3::z_axis(), v.to_radians()),
            }
        }
        local.push(q);
        translations.push(t);
    }
    let (positions, rotations) =
        skeleton.forward_kinematics_with(&translations[0], &local, |i| translations[i]);
    let n = positions.len();
    let mut pose = Pose {
        positions,
        rotations,
        velocities: vec![Vec3::zeros(); n],
        root: Default::default(),
    };
    pose.root = pose.default_root();
    pose
}

/// Serialize a clip. The root carries position and ZYX rotation channels,
/// every other joint ZYX rotation channels only.
pub fn write_bvh_string(clip: &MotionClip, options: &BvhOptions) -> String {
    let s = &clip.skeleton;
    let inv = 1.0 / options.scale;
    let mut out = String::from("HIERARCHY\n");
    let children: Vec<Vec<usize>> = (0..s.len())
        .map(|i| (0..s.len()).filter(|&c| s.parent(c) == Some(i)).collect())
        .collect();

    fn emit(
        out: &mut String,
        s: &Skeleton,
        children: &[Vec<usize>],
        i: usize,
        depth: usize,
        inv: f64,
    ) {
        let pad = "  ".repeat(depth);
        let b = &s.bones()[i];
        let kw = if b.parent.is_none() { "ROOT" } else { "JOINT" };
        let _ = writeln!(out, "{pad}{kw} {}", b.name);
        let _ = writeln!(out, "{pad}{{");
        let o = b.offset * inv;
        let _ = writeln!(out, "{pad}  OFFSET {:.6} {:.6} {:.6}", o.x, o.y, o.z);
        if b.parent.is_none() {
            let _ = writeln!(
                out,
                "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation"
            );
        } else {
            let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Yrotation Xrotation");
        }
        for &c in &children[i] {
            emit(out, s, children, c, depth + 1, inv);
        }
        let _ = writeln!(out, "{pad}}}");
    }
    emit(&mut out, s, &children, 0, 0, inv);

    // Channel order in the file follows depth-first traversal, which matches
    // bone order only for depth-first sorted skeletons; record the order.
    let mut order = Vec::with_capacity(s.len());
    fn visit(children: &[Vec<usize>], i: usize, order: &mut Vec<usize>) {
        order.push(i);
        for &c in &children[i] {
            visit(children, c, order);
        }
    }
    visit(&children, 0, &mut order);

    let _ = writeln!(out, "MOTION");
    let _ = writeln!(out, "Frames: {}", clip.len());
    let _ = writeln!(out, "Frame Time: {:.10}", 1.0 / clip.fps);
    for pose in &clip.frames {
        let local = pose.local_rotations(s);
        let mut line = String::new();
        for &i in &order {
            if s.parent(i).is_none() {
                let p = pose.positions[i] * inv;
                let _ = write!(line, "{:.6} {:.6} {:.6} ", p.x, p.y, p.z);
            }
            let (rx, ry, rz) = local[i].euler_angles();
            let _ = write!(
                line,
                "{:.6} {:.6} {:.6} ",
                rz.to_degrees(),
                ry.to_degrees(),
                rx.to_degrees()
            );
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn write_bvh(clip: &MotionClip, path: impl AsRef<Path>, options: &BvhOptions) -> Result<()> {
    std::fs::write(path, write_bvh_string(clip, options))?;
    Ok(())
}
