//! Root-relative joint velocity windows and per-frame phase export.

use ndarray::{Array2, ArrayView2};

use super::{Pae, PhaseParams, PhaseSeries};
use crate::error::Result;
use crate::features::RootTrajectory;
use crate::math::{wrap_angle, Vec3};
use crate::motion::{finite_difference, MotionClip};

/// Centered 2 s window at 30 fps, both ends inclusive.
pub const WINDOW_FRAMES: usize = 61;

/// `[3B, L]` joint velocities with root motion removed: positions are taken
/// in each frame's own root space and then differenced.
pub fn local_velocity_series(clip: &MotionClip, traj: &RootTrajectory) -> Array2<f64> {
    let (b, l) = (clip.skeleton.len(), clip.len());
    let mut out = Array2::zeros((3 * b, l));
    for j in 0..b {
        let local: Vec<Vec3> = clip
            .frames
            .iter()
            .zip(&traj.points)
            .map(|(f, t)| t.root().to_local_point(&f.positions[j]))
            .collect();
        for (i, v) in finite_difference(&local, clip.fps).iter().enumerate() {
            for k in 0..3 {
                out[[3 * j + k, i]] = v[k];
            }
        }
    }
    out
}

/// Window of `len` frames centered on `frame`; samples outside the clip are zero.
pub fn window_at(series: &Array2<f64>, frame: usize, len: usize) -> Array2<f64> {
    let l = series.ncols() as isize;
    let half = (len / 2) as isize;
    let mut w = Array2::zeros((series.nrows(), len));
    for t in 0..len as isize {
        let src = frame as isize + t - half;
        if (0..l).contains(&src) {
            w.column_mut(t as usize).assign(&series.column(src as usize));
        }
    }
    w
}

/// Windows centered on every `stride`-th frame of a clip.
pub fn velocity_windows(clip: &MotionClip, traj: &RootTrajectory, len: usize, stride: usize) -> Vec<Array2<f64>> {
    let series = local_velocity_series(clip, traj);
    (0..clip.len()).step_by(stride.max(1)).map(|f| window_at(&series, f, len)).collect()
}

/// Per-frame phase parameters from the window centered at each frame.
/// Channels whose phase runs backwards in time (negative median rate) are
/// sign-flipped so phases advance with forward playback.
pub fn export_phase_series(model: &Pae, clip: &MotionClip, traj: &RootTrajectory) -> Result<PhaseSeries> {
    let series = local_velocity_series(clip, traj);
    let n = model.cfg.window;
    let mut params: Vec<PhaseParams> = Vec::with_capacity(clip.len());
    let frames: Vec<usize> = (0..clip.len()).collect();
    for chunk in frames.chunks(256) {
        let windows: Vec<Array2<f64>> = chunk.iter().map(|&f| window_at(&series, f, n)).collect();
        let views: Vec<ArrayView2<f64>> = windows.iter().map(|w| w.view()).collect();
        params.extend(model.encode_batch(&views)?);
    }
    let channels = model.cfg.channels;
    for c in 0..channels {
        let mut rates: Vec<f64> = params
            .windows(2)
            .map(|p| wrap_angle(p[1].phase[c] - p[0].phase[c]))
            .collect();
        rates.sort_by(f64::total_cmp);
        let median = rates.get(rates.len() / 2).copied().unwrap_or(0.0);
        if median < 0.0 {
            for p in &mut params {
                p.phase[c] = wrap_angle(-p.phase[c]);
            }
        }
    }
    Ok(PhaseSeries::from_params(channels, params))
}
