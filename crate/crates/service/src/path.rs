//! Authored root paths: presets and custom polylines smoothed by a cubic
//! Hermite spline through the control points.

use std::f64::consts::TAU;

use inbetween::features::TrajPoint;
use inbetween::math::{slerp2, RootTransform, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// A path control point in ground-plane coordinates (x, z); `time` is seconds
/// from the transition start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathKeyframe {
    pub position: [f64; 2],
    /// Facing direction; the spline tangent when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<[f64; 2]>,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum PathSpec {
    /// Stays within 1% of `radius` from 8 keyframes up.
    Circle {
        radius: f64,
        #[serde(default = "default_circle_keyframes")]
        keyframes: usize,
    },
    Square {
        size: f64,
    },
    Star {
        outer: f64,
        inner: f64,
        #[serde(default = "default_star_points")]
        points: usize,
    },
    /// World-space control points.
    Custom {
        points: Vec<PathKeyframe>,
    },
}

fn default_circle_keyframes() -> usize {
    8
}

fn default_star_points() -> usize {
    5
}

/// One sample of an evaluated path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub time: f64,
    pub position: [f64; 2],
    pub forward: [f64; 2],
    pub velocity: [f64; 2],
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

fn arr(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

fn positive(name: &str, v: f64) -> Result<(), ApiError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ApiError::invalid(format!("path {name} must be positive, got {v}")))
    }
}

impl PathSpec {
    pub fn validate(&self) -> Result<(), ApiError> {
        match self {
            PathSpec::Circle { radius, keyframes } => {
                positive("radius", *radius)?;
                if *keyframes < 3 {
                    return Err(ApiError::invalid("circle needs at least 3 keyframes"));
                }
            }
            PathSpec::Square { size } => positive("size", *size)?,
            PathSpec::Star { outer, inner, points } => {
                positive("outer radius", *outer)?;
                positive("inner radius", *inner)?;
                if *points < 2 {
                    return Err(ApiError::invalid("star needs at least 2 points"));
                }
            }
            PathSpec::Custom { points } => {
                if points.len() < 2 {
                    return Err(ApiError::invalid(format!("custom path needs at least 2 points, got {}", points.len())));
                }
                for (i, p) in points.iter().enumerate() {
                    let mut values = vec![p.time, p.position[0], p.position[1]];
                    if let Some(f) = p.forward {
                        if v2(f).norm() < 1e-9 {
                            return Err(ApiError::invalid(format!("path point {i} has a zero facing direction")));
                        }
                        values.extend(f);
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(ApiError::invalid(format!("path point {i} is not finite")));
                    }
                }
                if let Some(i) = points.windows(2).position(|w| w[1].time <= w[0].time) {
                    return Err(ApiError::invalid(format!("path times must increase strictly (point {})", i + 1)));
                }
            }
        }
        Ok(())
    }

    /// Resolve to a spline. Presets start at `origin` facing along its
    /// forward direction and complete one loop over `duration` seconds.
    pub fn build(&self, origin: &RootTransform, duration: f64) -> Result<SmoothPath, ApiError> {
        self.validate()?;
        positive("duration", duration)?;
        let shape: Vec<Vec2> = match self {
            PathSpec::Custom { points } => {
                let keys = points.iter().map(|p| (v2(p.position), p.forward.map(v2), p.time)).collect();
                return SmoothPath::new(keys, false);
            }
            PathSpec::Circle { radius, keyframes } => (0..*keyframes)
                .map(|k| {
                    let a = TAU * k as f64 / *keyframes as f64;
                    Vec2::new(a.cos(), a.sin()) * *radius
                })
                .collect(),
            PathSpec::Square { size } => {
                let h = size / 2.0;
                vec![Vec2::new(-h, -h), Vec2::new(-h, h), Vec2::new(h, h), Vec2::new(h, -h)]
            }
            PathSpec::Star { outer, inner, points } => (0..2 * points)
                .map(|k| {
                    let a = TAU * k as f64 / (2 * points) as f64;
                    let r = if k % 2 == 0 { *outer } else { *inner };
                    Vec2::new(a.sin(), a.cos()) * r
                })
                .collect(),
        };
        let n = shape.len() as f64;
        let keys: Vec<_> = shape.iter().enumerate().map(|(k, p)| (*p, None, duration * k as f64 / n)).collect();
        let raw = SmoothPath::new(keys, true)?;
        // Move the shape so its start sits at the origin root, heading along it.
        let start = raw.evaluate(0.0);
        let frame = RootTransform::new(v2(start.position), v2(start.forward));
        let anchored = raw
            .keys
            .iter()
            .map(|(p, f, t)| {
                let local = frame.to_local_point2(p);
                let dir = f.map(|f| frame.to_local_dir2(&f)).map(|d| origin.to_world_dir2(&d));
                (origin.to_world_point2(&local), dir, *t)
            })
            .collect();
        SmoothPath::new(anchored, true)
    }
}

/// Cubic Hermite spline with non-uniform Catmull-Rom tangents; open paths use
/// one-sided end tangents, closed paths wrap around.
#[derive(Clone, Debug)]
pub struct SmoothPath {
    keys: Vec<(Vec2, Option<Vec2>, f64)>,
    tangents: Vec<Vec2>,
    facings: Vec<Vec2>,
    closed: bool,
    /// Loop length in seconds for closed paths.
    period: f64,
}

impl SmoothPath {
    fn new(keys: Vec<(Vec2, Option<Vec2>, f64)>, closed: bool) -> Result<Self, ApiError> {
        let n = keys.len();
        if n < 2 {
            return Err(ApiError::invalid("a path needs at least 2 points"));
        }
        let period = if closed {
            // Spacing of the closing segment matches the others.
            keys[n - 1].2 + (keys[n - 1].2 - keys[0].2) / (n - 1) as f64
        } else {
            keys[n - 1].2
        };
        let point = |i: isize| -> (Vec2, f64) {
            if closed {
                let m = n as isize;
                let wraps = i.div_euclid(m) as f64;
                let (p, _, t) = &keys[i.rem_euclid(m) as usize];
                (*p, t + wraps * (period - keys[0].2))
            } else {
                let (p, _, t) = &keys[i.clamp(0, n as isize - 1) as usize];
                (*p, *t)
            }
        };
        let tangents: Vec<Vec2> = (0..n as isize)
            .map(|i| {
                let (p0, t0) = point(i - 1);
                let (p1, t1) = point(i);
                let (p2, t2) = point(i + 1);
                if !closed && i == 0 {
                    (p2 - p1) / (t2 - t1)
                } else if !closed && i == n as isize - 1 {
                    (p1 - p0) / (t1 - t0)
                } else {
                    let (d0, d1) = (t1 - t0, t2 - t1);
                    ((p1 - p0) / d0 * d1 + (p2 - p1) / d1 * d0) / (d0 + d1)
                }
            })
            .collect();
        let facings = keys
            .iter()
            .zip(&tangents)
            .enumerate()
            .map(|(i, ((_, f, _), m))| {
                let dir = match f {
                    Some(f) => *f,
                    None if m.norm() > 1e-9 => *m,
                    None => {
                        let j = if i + 1 < n { i + 1 } else { i - 1 };
                        let d = keys[j].0 - keys[i].0;
                        if i + 1 < n { d } else { -d }
                    }
                };
                if dir.norm() > 1e-12 { dir.normalize() } else { Vec2::new(0.0, 1.0) }
            })
            .collect();
        Ok(Self { keys, tangents, facings, closed, period })
    }

    pub fn start_time(&self) -> f64 {
        self.keys[0].2
    }

    pub fn end_time(&self) -> f64 {
        if self.closed { self.period } else { self.keys[self.keys.len() - 1].2 }
    }

    pub fn control_points(&self) -> Vec<[f64; 2]> {
        self.keys.iter().map(|k| arr(k.0)).collect()
    }

    /// Position, facing and velocity at `time`; times outside the path hold the end point at rest.
    pub fn evaluate(&self, time: f64) -> PathSample {
        let n = self.keys.len();
        let (start, end) = (self.start_time(), self.end_time());
        if time <= start || time >= end {
            let (i, vel) = if time <= start { (0, self.tangents[0]) } else if self.closed { (0, self.tangents[0]) } else { (n - 1, self.tangents[n - 1]) };
            let at_rest = time < start || time > end;
            return PathSample {
                time,
                position: arr(self.keys[i].0),
                forward: arr(self.facings[i]),
                velocity: if at_rest { [0.0, 0.0] } else { arr(vel) },
            };
        }
        let seg = (0..n).rev().find(|&i| self.keys[i].2 <= time).unwrap_or(0);
        let next = if seg + 1 < n { seg + 1 } else { 0 };
        let t0 = self.keys[seg].2;
        let t1 = if seg + 1 < n { self.keys[seg + 1].2 } else { self.period };
        let h = t1 - t0;
        let s = (time - t0) / h;
        let (p0, p1) = (self.keys[seg].0, self.keys[next].0);
        let (m0, m1) = (self.tangents[seg] * h, self.tangents[next] * h);
        let (s2, s3) = (s * s, s * s * s);
        let pos = p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + m1 * (s3 - s2);
        let vel = (p0 * (6.0 * s2 - 6.0 * s) + m0 * (3.0 * s2 - 4.0 * s + 1.0) + p1 * (-6.0 * s2 + 6.0 * s) + m1 * (3.0 * s2 - 2.0 * s)) / h;
        let fwd = slerp2(&self.facings[seg], &self.facings[next], s);
        PathSample { time, position: arr(pos), forward: arr(fwd), velocity: arr(vel) }
    }

    /// Samples at `fps` for frames `0..=frames`.
    pub fn sample(&self, frames: usize, fps: f64) -> Vec<PathSample> {
        (0..=frames).map(|f| self.evaluate(f as f64 / fps)).collect()
    }
}

impl From<&PathSample> for TrajPoint {
    fn from(s: &PathSample) -> Self {
        TrajPoint { position: v2(s.position), forward: v2(s.forward), velocity: v2(s.velocity) }
    }
}
