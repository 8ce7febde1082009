//! Frequency-domain parameterization of a sampled curve.

use rustfft::{num_complex::Complex, FftPlanner};

/// `(F, A, B)`: power-weighted mean frequency over the positive bins
/// `1..=N/2`, amplitude `2 sqrt(sum p) / N`, and the mean.
pub fn fft_parameterize(curve: &[f64], fps: f64) -> (f64, f64, f64) {
    let n = curve.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let mut buf: Vec<Complex<f64>> = curve.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bias = buf[0].re / n as f64;
    let mut power = 0.0;
    let mut weighted = 0.0;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let p = c.norm_sqr();
        power += p;
        weighted += p * k as f64 * fps / n as f64;
    }
    if power <= f64::MIN_POSITIVE {
        return (0.0, 0.0, bias);
    }
    (weighted / power, 2.0 * power.sqrt() / n as f64, bias)
}

/// Real DFT basis over bins `1..=N/2`, used for differentiable evaluation.
#[derive(Clone, Debug)]
pub struct DftBasis {
    pub n: usize,
    pub bins: usize,
    /// `cos[k][t]`, `sin[k][t]` for bin `k + 1`.
    pub cos: Vec<Vec<f64>>,
    pub sin: Vec<Vec<f64>>,
    /// Frequency (Hz) of each bin.
    pub freqs: Vec<f64>,
}

impl DftBasis {
    pub fn new(n: usize, fps: f64) -> Self {
        let bins = n / 2;
        let angle = |k: usize, t: usize| std::f64::consts::TAU * ((k * t) % n) as f64 / n as f64;
        Self {
            n,
            bins,
            cos: (1..=bins).map(|k| (0..n).map(|t| angle(k, t).cos()).collect()).collect(),
            sin: (1..=bins).map(|k| (0..n).map(|t| angle(k, t).sin()).collect()).collect(),
            freqs: (1..=bins).map(|k| k as f64 * fps / n as f64).collect(),
        }
    }
}
