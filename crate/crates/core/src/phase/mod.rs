//! Phase manifold: per-channel amplitude, frequency, bias and phase angle,
//! the periodic autoencoder that extracts them, and per-clip export.

pub mod fft;
pub mod pae;
pub mod export;

use serde::{Deserialize, Serialize};

use crate::math::wrap_angle;

pub use export::{export_phase_series, velocity_windows, WINDOW_FRAMES};
pub use fft::fft_parameterize;
pub use pae::{train_pae, Pae, PaeConfig, TrainReport};

/// Number of phase channels used by the in-betweening model.
pub const PHASE_CHANNELS: usize = 5;

/// Per-channel phase parameters at one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
    pub bias: Vec<f64>,
    /// Radians in (-pi, pi].
    pub phase: Vec<f64>,
}

impl PhaseParams {
    pub fn zeros(channels: usize) -> Self {
        Self {
            amplitude: vec![0.0; channels],
            frequency: vec![0.0; channels],
            bias: vec![0.0; channels],
            phase: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.amplitude.len()
    }

    /// Recover amplitude and phase from a manifold vector (frequency and bias kept).
    pub fn set_from_manifold(&mut self, p: &[f64]) {
        for c in 0..self.channels() {
            let (x, y) = (p[2 * c], p[2 * c + 1]);
            self.amplitude[c] = x.hypot(y);
            self.phase[c] = wrap_angle(x.atan2(y));
        }
    }
}

/// Manifold vector: per channel `(A sin theta, A cos theta)`.
pub fn compute_manifold(params: &PhaseParams) -> Vec<f64> {
    let mut p = Vec::with_capacity(2 * params.channels());
    for (a, t) in params.amplitude.iter().zip(&params.phase) {
        p.push(a * t.sin());
        p.push(a * t.cos());
    }
    p
}

/// Per-frame phase parameters and manifold vectors of one clip.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseSeries {
    pub channels: usize,
    pub params: Vec<PhaseParams>,
    pub manifold: Vec<Vec<f64>>,
}

impl PhaseSeries {
    pub fn from_params(channels: usize, params: Vec<PhaseParams>) -> Self {
        let manifold = params.iter().map(compute_manifold).collect();
        Self { channels, params, manifold }
    }

    /// A series with every channel at zero amplitude.
    pub fn zeros(channels: usize, frames: usize) -> Self {
        Self::from_params(channels, vec![PhaseParams::zeros(channels); frames])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn clamp(&self, frame: isize) -> usize {
        frame.clamp(0, self.params.len() as isize - 1) as usize
    }

    pub fn manifold_at(&self, frame: isize) -> &[f64] {
        &self.manifold[self.clamp(frame)]
    }

    pub fn params_at(&self, frame: isize) -> &PhaseParams {
        &self.params[self.clamp(frame)]
    }
}
