//! Sampling windows around a pivot frame.

use serde::{Deserialize, Serialize};

/// Samples in the centered past/future window.
pub const TRAJ_SAMPLES: usize = 13;
/// Samples in the past-only and future-only windows.
pub const HALF_SAMPLES: usize = 7;
/// Index of the pivot inside the centered window.
pub const PIVOT: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    /// Sample offsets in frames relative to the pivot.
    pub offsets: Vec<isize>,
    pub fps: f64,
}

impl TimeWindow {
    /// Uniform samples over `[t0, t1]` seconds.
    pub fn uniform(t0: f64, t1: f64, samples: usize, fps: f64) -> Self {
        let offsets = (0..samples)
            .map(|k| {
                let t = t0 + (t1 - t0) * k as f64 / (samples - 1) as f64;
                (t * fps).round() as isize
            })
            .collect();
        Self { offsets, fps }
    }

    /// 13 samples over [-1 s, +1 s].
    pub fn past_future(fps: f64) -> Self {
        Self::uniform(-1.0, 1.0, TRAJ_SAMPLES, fps)
    }

    /// 7 samples over [-1 s, 0 s].
    pub fn past(fps: f64) -> Self {
        Self::uniform(-1.0, 0.0, HALF_SAMPLES, fps)
    }

    /// 7 samples over [0 s, +1 s].
    pub fn future(fps: f64) -> Self {
        Self::uniform(0.0, 1.0, HALF_SAMPLES, fps)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.offsets.iter().map(|&o| o as f64 / self.fps).collect()
    }

    /// Absolute frame indices around `pivot`.
    pub fn frames(&self, pivot: isize) -> impl Iterator<Item = isize> + '_ {
        self.offsets.iter().map(move |o| pivot + o)
    }

    /// Frame spacing between consecutive samples.
    pub fn step(&self) -> isize {
        self.offsets[1] - self.offsets[0]
    }
}
