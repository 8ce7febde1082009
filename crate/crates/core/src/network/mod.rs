//! Gated mixture-of-experts predictor.
//!
//! A gating network maps the phase input to blend weights over `K` experts.
//! Each expert is a three-layer ELU network; weights and biases are blended
//! with the gating weights before the forward pass.

mod checkpoint;
mod train;

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Dims, Normalization};

pub use checkpoint::{MOE_FORMAT, MOE_VERSION};
pub use train::{train, TrainConfig, TrainReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoeConfig {
    pub input: usize,
    pub gating_input: usize,
    pub output: usize,
    pub hidden: usize,
    pub gating_hidden: usize,
    pub experts: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl MoeConfig {
    pub fn for_dims(dims: &Dims) -> Self {
        Self {
            input: dims.input_width(),
            gating_input: dims.gating_width(),
            output: dims.output_width(),
            hidden: 512,
            gating_hidden: 128,
            experts: 8,
            dropout: 0.3,
            seed: 0,
        }
    }
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub(crate) fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Dense layer, `w: [out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((output, input), |_| rng.gen_range(-bound..bound)),
            b: Array1::zeros(output),
        }
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.w.dot(&x) + &self.b
    }
}

/// One expert-blended layer: `w: [K, out, in]`, `b: [K, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertLayer {
    pub w: Array3<f64>,
    pub b: Array2<f64>,
}

impl ExpertLayer {
    fn new(experts: usize, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        Self {
            w: Array3::from_shape_fn((experts, output, input), |_| rng.gen_range(-bound..bound)),
            b: Array2::zeros((experts, output)),
        }
    }

    /// Parameters blended by `omega`.
    pub fn blend(&self, omega: &[f64]) -> Dense {
        let (_, out, inp) = self.w.dim();
        let mut w = Array2::zeros((out, inp));
        let mut b = Array1::zeros(out);
        for (k, &o) in omega.iter().enumerate() {
            w.scaled_add(o, &self.w.index_axis(Axis(0), k));
            b.scaled_add(o, &self.b.index_axis(Axis(0), k));
        }
        Dense { w, b }
    }

    pub fn expert(&self, k: usize) -> Dense {
        Dense {
            w: self.w.index_axis(Axis(0), k).to_owned(),
            b: self.b.index_axis(Axis(0), k).to_owned(),
        }
    }
}

/// Mixture-of-experts model with its feature normalization.
#[derive(Clone, Debug)]
pub struct Moe {
    pub cfg: MoeConfig,
    pub dims: Dims,
    pub gating: [Dense; 3],
    pub layers: [ExpertLayer; 3],
    pub input_norm: Normalization,
    pub gating_norm: Normalization,
    pub output_norm: Normalization,
    /// Hash of the training configuration that produced these weights.
    pub config_hash: String,
    /// Training configuration recorded with the weights.
    pub train_config: Option<TrainConfig>,
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Moe {
    /// Randomly initialized model with identity normalization.
    pub fn new(dims: Dims, cfg: MoeConfig) -> Result<Self> {
        let expect = [dims.input_width(), dims.gating_width(), dims.output_width()];
        let got = [cfg.input, cfg.gating_input, cfg.output];
        if expect != got {
            return Err(Error::InvalidArgument(format!(
                "network widths {got:?} do not match feature widths {expect:?}"
            )));
        }
        Ok(Self::with_widths(dims, cfg))
    }

    /// Model with arbitrary widths (used for small test networks).
    pub fn with_widths(dims: Dims, cfg: MoeConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (gi, gh, k) = (cfg.gating_input, cfg.gating_hidden, cfg.experts);
        let gating = [Dense::new(gi, gh, &mut rng), Dense::new(gh, gh, &mut rng), Dense::new(gh, k, &mut rng)];
        let (i, h, o) = (cfg.input, cfg.hidden, cfg.output);
        let layers = [
            ExpertLayer::new(k, i, h, &mut rng),
            ExpertLayer::new(k, h, h, &mut rng),
            ExpertLayer::new(k, h, o, &mut rng),
        ];
        Self {
            input_norm: Normalization::identity(i),
            gating_norm: Normalization::identity(gi),
            output_norm: Normalization::identity(o),
            cfg,
            dims,
            gating,
            layers,
            config_hash: String::new(),
            train_config: None,
        }
    }

    fn check(&self, context: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(Error::Shape { context, expected, found });
        }
        Ok(())
    }

    /// Expert weights from an already normalized gating input.
    pub fn gate_normalized(&self, g: &[f64]) -> Vec<f64> {
        let g = ArrayView1::from(g);
        let h1 = self.gating[0].apply(g).mapv(elu);
        let h2 = self.gating[1].apply(h1.view()).mapv(elu);
        let logits = self.gating[2].apply(h2.view());
        softmax(logits.as_slice().unwrap())
    }

    /// Expert weights for a raw (unnormalized) phase input.
    pub fn gate(&self, phase_input: &[f64]) -> Result<Vec<f64>> {
        self.check("gating input", self.cfg.gating_input, phase_input.len())?;
        let mut g = phase_input.to_vec();
        self.gating_norm.normalize(&mut g);
        Ok(self.gate_normalized(&g))
    }

    /// Blended three-layer network for `omega`.
    pub fn blend(&self, omega: &[f64]) -> [Dense; 3] {
        [self.layers[0].blend(omega), self.layers[1].blend(omega), self.layers[2].blend(omega)]
    }

    /// Forward a normalized input through explicit layers, yielding a normalized output.
    pub fn run_layers(layers: &[Dense; 3], x: &[f64]) -> Array1<f64> {
        let h1 = layers[0].apply(ArrayView1::from(x)).mapv(elu);
        let h2 = layers[1].apply(h1.view()).mapv(elu);
        layers[2].apply(h2.view())
    }

    /// Predict a de-normalized output from a raw input and blend weights.
    pub fn blend_and_predict(&self, input: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
        self.check("motion input", self.cfg.input, input.len())?;
        self.check("blend weights", self.cfg.experts, omega.len())?;
        let mut x = input.to_vec();
        self.input_norm.normalize(&mut x);
        let y = Self::run_layers(&self.blend(omega), &x);
        let mut y = y.to_vec();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("motion prediction network".into()));
        }
        self.output_norm.denormalize(&mut y);
        Ok(y)
    }

    /// Gate and predict in one call; returns the output and the blend weights.
    pub fn predict(&self, input: &[f64], phase_input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let omega = self.gate(phase_input)?;
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gating network".into()));
        }
        Ok((self.blend_and_predict(input, &omega)?, omega))
    }

    /// All parameters in a fixed order: gating layers, then expert layers.
    pub fn parameters(&self) -> Vec<f64> {
        self.param_slices().into_iter().flat_map(|s| s.iter().copied()).collect()
    }

    pub(crate) fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in &self.gating {
            out.push(d.w.as_slice().unwrap());
            out.push(d.b.as_slice().unwrap());
        }
        for l in &self.layers {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }

    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.gating {
            out.push(d.w.as_slice_mut().unwrap());
            out.push(d.b.as_slice_mut().unwrap());
        }
        for l in &mut self.layers {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.param_slices().iter().map(|s| s.len()).sum();
        self.check("network parameters", total, values.len())?;
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }
}
