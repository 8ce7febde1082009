//! Training tensor store: input, gating and output matrices with
//! per-column normalization, serialized as a JSON manifest plus float32 blobs.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vectors::{Dims, Layout};
use super::{sample_training_pair, style_vector, ClipFeatures, MAX_TARGET_OFFSET};
use crate::binio::{read_f32s, write_f32s};
use crate::error::{Error, Result};
use crate::motion::MotionClip;

pub const STORE_FORMAT: &str = "inbetween-tensors";
pub const STORE_VERSION: u32 = 1;
const MIN_STD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(width: usize) -> Self {
        Self { mean: vec![0.0; width], std: vec![1.0; width] }
    }

    /// Column statistics; constant columns get std 1 and the others at
    /// least `floor`, so tiny drifts in near-rigid features stay bounded.
    pub fn fit(data: &Array2<f32>, floor: f64) -> Self {
        let n = data.nrows().max(1) as f64;
        let mut mean = vec![0.0; data.ncols()];
        let mut std = vec![0.0; data.ncols()];
        for (j, col) in data.columns().into_iter().enumerate() {
            let m = col.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = col.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            std[j] = if var.sqrt() < MIN_STD { 1.0 } else { var.sqrt().max(floor) };
        }
        Self { mean, std }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn denormalize(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }

    pub fn normalized(&self, row: ArrayView1<f32>) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, m), s)| (v as f64 - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub samples_per_frame: usize,
    pub max_target_offset: usize,
    pub seed: u64,
    pub style_dims: usize,
    /// Lower bound on normalization std for non-constant columns.
    pub std_floor: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples_per_frame: 1,
            max_target_offset: MAX_TARGET_OFFSET,
            seed: 0,
            style_dims: 0,
            std_floor: 0.01,
        }
    }
}

/// Rows contributed by one clip, stored contiguously.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipRows {
    pub name: String,
    pub start: usize,
    pub count: usize,
}

/// Unnormalized feature rows with their normalization statistics.
#[derive(Clone, Debug)]
pub struct TensorStore {
    pub dims: Dims,
    pub inputs: Array2<f32>,
    pub gating: Array2<f32>,
    pub outputs: Array2<f32>,
    pub input_norm: Normalization,
    pub gating_norm: Normalization,
    pub output_norm: Normalization,
    pub clips: Vec<ClipRows>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    endianness: String,
    dims: Dims,
    rows: usize,
    input_layout: Layout,
    gating_layout: Layout,
    output_layout: Layout,
    input_norm: Normalization,
    gating_norm: Normalization,
    output_norm: Normalization,
    clips: Vec<ClipRows>,
    blobs: Vec<String>,
}

/// Sample training pairs from every frame of every clip. `styles[k]` is the
/// optional style index of clip `k`.
pub fn build_dataset(
    clips: &[MotionClip],
    features: &[ClipFeatures],
    styles: &[Option<usize>],
    cfg: &DatasetConfig,
) -> Result<TensorStore> {
    if clips.len() != features.len() {
        return Err(Error::LengthMismatch(clips.len(), features.len()));
    }
    let dims = Dims {
        bones: clips.first().map_or(22, |c| c.skeleton.len()),
        channels: features.first().map_or(5, |f| f.phases.channels),
        style: cfg.style_dims,
    };
    let max_dt = cfg.max_target_offset.clamp(1, MAX_TARGET_OFFSET);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (wi, wg, wo) = (dims.input_width(), dims.gating_width(), dims.output_width());
    let (mut xs, mut gs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    let mut rows = Vec::new();
    let mut count = 0;
    for (k, (clip, feats)) in clips.iter().zip(features).enumerate() {
        if feats.phases.len() != clip.len() {
            return Err(Error::LengthMismatch(clip.len(), feats.phases.len()));
        }
        let style = style_vector(styles.get(k).copied().flatten(), cfg.style_dims)?;
        let start = count;
        for i in 0..clip.len() {
            for _ in 0..cfg.samples_per_frame {
                let dt = rng.gen_range(1..=max_dt);
                let (x, y) = sample_training_pair(clip, feats, i, dt, &style)?;
                let (x, g, y) = (x.motion(), x.gating(), y.to_vec());
                debug_assert_eq!((x.len(), g.len(), y.len()), (wi, wg, wo));
                if let Some(feature) = x.iter().chain(&g).chain(&y).position(|v| !v.is_finite()) {
                    return Err(Error::NanFeature { clip: clip.name.clone(), frame: i, feature });
                }
                xs.extend(x.iter().map(|&v| v as f32));
                gs.extend(g.iter().map(|&v| v as f32));
                ys.extend(y.iter().map(|&v| v as f32));
                count += 1;
            }
        }
        rows.push(ClipRows { name: clip.name.clone(), start, count: count - start });
    }
    let shape = |w: usize, v: Vec<f32>| Array2::from_shape_vec((count, w), v).expect("row widths are fixed");
    let (inputs, gating, outputs) = (shape(wi, xs), shape(wg, gs), shape(wo, ys));
    Ok(TensorStore {
        dims,
        input_norm: Normalization::fit(&inputs, cfg.std_floor),
        gating_norm: Normalization::fit(&gating, cfg.std_floor),
        output_norm: Normalization::fit(&outputs, cfg.std_floor),
        inputs,
        gating,
        outputs,
        clips: rows,
    })
}

impl TensorStore {
    pub fn rows(&self) -> usize {
        self.inputs.nrows()
    }

    /// Write `manifest.json` and `inputs.f32`, `gating.f32`, `outputs.f32` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let blobs = ["inputs.f32", "gating.f32", "outputs.f32"];
        let manifest = Manifest {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            endianness: "LE".into(),
            dims: self.dims,
            rows: self.rows(),
            input_layout: self.dims.input_layout(),
            gating_layout: self.dims.gating_layout(),
            output_layout: self.dims.output_layout(),
            input_norm: self.input_norm.clone(),
            gating_norm: self.gating_norm.clone(),
            output_norm: self.output_norm.clone(),
            clips: self.clips.clone(),
            blobs: blobs.iter().map(|s| s.to_string()).collect(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        for (name, data) in blobs.iter().zip([&self.inputs, &self.gating, &self.outputs]) {
            let mut buf = Vec::with_capacity(data.len() * 4);
            write_f32s(&mut buf, data.iter().copied())?;
            std::fs::write(dir.join(name), buf)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m: Manifest = serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)?;
        if m.format != STORE_FORMAT || m.version != STORE_VERSION || m.endianness != "LE" {
            return Err(Error::Format(format!("{} v{} ({})", m.format, m.version, m.endianness)));
        }
        let widths = [m.dims.input_width(), m.dims.gating_width(), m.dims.output_width()];
        let mut arrays = Vec::new();
        for (name, w) in m.blobs.iter().zip(widths) {
            let bytes = std::fs::read(dir.join(name))?;
            if bytes.len() != m.rows * w * 4 {
                return Err(Error::Shape { context: "tensor blob bytes", expected: m.rows * w * 4, found: bytes.len() });
            }
            let v = read_f32s(&mut bytes.as_slice(), m.rows * w)?;
            arrays.push(Array2::from_shape_vec((m.rows, w), v).expect("size checked"));
        }
        let outputs = arrays.pop().unwrap();
        let gating = arrays.pop().unwrap();
        let inputs = arrays.pop().unwrap();
        Ok(Self {
            dims: m.dims,
            inputs,
            gating,
            outputs,
            input_norm: m.input_norm,
            gating_norm: m.gating_norm,
            output_norm: m.output_norm,
            clips: m.clips,
        })
    }
}
