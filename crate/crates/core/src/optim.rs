//! Adam with optional decoupled weight decay and cosine warm restarts.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay, scaled by the schedule multiplier.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam state for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            cfg,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    /// One update with the learning rate scaled by `multiplier`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], multiplier: f64) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let lr = c.learning_rate * multiplier;
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
                p[i] -= lr * update + c.weight_decay * multiplier * p[i];
            }
        }
    }
}

/// Cosine annealing with warm restarts: the first cycle lasts `period`
/// epochs and each following cycle is `mult` times longer.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WarmRestarts {
    pub period: f64,
    pub mult: f64,
}

impl Default for WarmRestarts {
    fn default() -> Self {
        Self { period: 10.0, mult: 2.0 }
    }
}

impl WarmRestarts {
    /// Learning-rate multiplier in [0, 1] at fractional epoch `epoch`.
    pub fn multiplier(&self, epoch: f64) -> f64 {
        let (mut start, mut len) = (0.0, self.period.max(1e-9));
        while epoch >= start + len {
            start += len;
            len *= self.mult.max(1.0);
        }
        0.5 * (1.0 + (std::f64::consts::PI * (epoch - start) / len).cos())
    }
}
