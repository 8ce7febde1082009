//! End-to-end MSE training of the gated network on normalized features.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{elu, elu_grad, Moe, MoeConfig};
use crate::error::{Error, Result};
use crate::features::TensorStore;
use crate::optim::{Adam, AdamConfig, WarmRestarts};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub network: MoeConfig,
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub restarts: WarmRestarts,
    /// Rows of this clip are held out for validation.
    pub validation_clip: Option<String>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(network: MoeConfig) -> Self {
        Self {
            network,
            epochs: 150,
            batch: 32,
            adam: AdamConfig { learning_rate: 1e-4, weight_decay: 1e-4, ..Default::default() },
            restarts: WarmRestarts::default(),
            validation_clip: None,
            seed: 0,
        }
    }

    /// Hex SHA-256 of the JSON-serialized configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    /// Held-out validation loss per epoch, when a validation clip is set.
    pub validation_losses: Vec<f64>,
    pub steps: usize,
}

/// Cached activations of a batched forward pass.
struct Pass {
    gating_in: Array2<f64>,
    gz: [Array2<f64>; 2],
    ga: [Array2<f64>; 2],
    omega: Array2<f64>,
    /// Layer inputs `h0, h1, h2`.
    h: Vec<Array2<f64>>,
    /// Pre-activation of layers 1 and 2.
    z: Vec<Array2<f64>>,
    /// Per-expert layer outputs, `[K][B, out]` for each layer.
    expert_out: Vec<Vec<Array2<f64>>>,
    /// Dropout masks (already scaled) for h0, h1, h2, gating input and gating hidden.
    masks: Vec<Option<Array2<f64>>>,
    out: Array2<f64>,
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Array2<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(Array2::from_shape_fn(shape, |_| if rng.gen::<f64>() < p { 0.0 } else { keep }))
}

fn apply_mask(x: &mut Array2<f64>, m: &Option<Array2<f64>>) {
    if let Some(m) = m {
        *x *= m;
    }
}

fn dense(x: &Array2<f64>, w: &ndarray::ArrayView2<f64>, b: &ndarray::ArrayView1<f64>) -> Array2<f64> {
    let mut y = x.dot(&w.t());
    y += b;
    y
}

impl Moe {
    fn forward_batch(&self, x: &Array2<f64>, g: &Array2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Pass {
        let p = self.cfg.dropout;
        let k = self.cfg.experts;
        let mut masks = Vec::new();

        let mut gating_in = g.clone();
        let gm = dropout_mask(g.dim(), p, rng.as_deref_mut());
        apply_mask(&mut gating_in, &gm);
        let mut gz = Vec::new();
        let mut ga = Vec::new();
        let mut a = gating_in.clone();
        let mut gh_masks = Vec::new();
        for d in &self.gating[..2] {
            let z = dense(&a, &d.w.view(), &d.b.view());
            let mut act = z.mapv(elu);
            let m = dropout_mask(act.dim(), p, rng.as_deref_mut());
            apply_mask(&mut act, &m);
            gh_masks.push(m);
            gz.push(z);
            ga.push(act.clone());
            a = act;
        }
        let logits = dense(&a, &self.gating[2].w.view(), &self.gating[2].b.view());
        let mut omega = logits;
        for mut row in omega.rows_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }

        let mut h = vec![x.clone()];
        let m0 = dropout_mask(x.dim(), p, rng.as_deref_mut());
        apply_mask(&mut h[0], &m0);
        masks.push(m0);
        let mut z = Vec::new();
        let mut expert_out = Vec::new();
        let mut out = Array2::zeros((0, 0));
        for (l, layer) in self.layers.iter().enumerate() {
            let input = &h[l];
            let ys: Vec<Array2<f64>> = (0..k)
                .map(|e| dense(input, &layer.w.index_axis(Axis(0), e), &layer.b.index_axis(Axis(0), e)))
                .collect();
            let mut blended = Array2::zeros(ys[0].dim());
            for (e, y) in ys.iter().enumerate() {
                let w = omega.column(e).insert_axis(Axis(1));
                blended += &(y * &w);
            }
            expert_out.push(ys);
            if l < 2 {
                let mut act = blended.mapv(elu);
                let m = dropout_mask(act.dim(), p, rng.as_deref_mut());
                apply_mask(&mut act, &m);
                masks.push(m);
                z.push(blended);
                h.push(act);
            } else {
                out = blended;
            }
        }
        masks.extend([gm]);
        masks.extend(gh_masks);
        Pass {
            gating_in,
            gz: [gz.remove(0), gz.remove(0)],
            ga: [ga.remove(0), ga.remove(0)],
            omega,
            h,
            z,
            expert_out,
            masks,
            out,
        }
    }

    /// Loss and gradients (in `param_slices` order) for a normalized batch.
    fn backward_batch(&self, pass: &Pass, target: &Array2<f64>) -> (f64, Vec<Vec<f64>>) {
        let k = self.cfg.experts;
        let diff = &pass.out - target;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / count;
        let mut dz = diff * (2.0 / count);

        let mut domega = Array2::<f64>::zeros(pass.omega.dim());
        let mut layer_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for l in (0..3).rev() {
            let layer = &self.layers[l];
            let input = &pass.h[l];
            let (_, out, inp) = layer.w.dim();
            let mut dw = Vec::with_capacity(k * out * inp);
            let mut db = Vec::with_capacity(k * out);
            let mut dh = Array2::<f64>::zeros(input.dim());
            for e in 0..k {
                let y = &pass.expert_out[l][e];
                let contrib = (&dz * y).sum_axis(Axis(1));
                domega.column_mut(e).scaled_add(1.0, &contrib);
                let w = pass.omega.column(e).insert_axis(Axis(1));
                let dze = &dz * &w;
                dw.extend(dze.t().dot(input).iter());
                db.extend(dze.sum_axis(Axis(0)).iter());
                dh += &dze.dot(&layer.w.index_axis(Axis(0), e));
            }
            layer_grads.push((dw, db));
            if l > 0 {
                if let Some(m) = &pass.masks[l] {
                    dh *= m;
                }
                dz = dh * &pass.z[l - 1].mapv(elu_grad);
            }
        }
        layer_grads.reverse();

        // Softmax backward.
        let dot = (&domega * &pass.omega).sum_axis(Axis(1)).insert_axis(Axis(1));
        let mut dg = &pass.omega * &(&domega - &dot);
        let mut gating_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for l in (0..3).rev() {
            let input = if l == 0 { &pass.gating_in } else { &pass.ga[l - 1] };
            let d = &self.gating[l];
            gating_grads.push((dg.t().dot(input).iter().copied().collect(), dg.sum_axis(Axis(0)).to_vec()));
            if l > 0 {
                let mut da = dg.dot(&d.w);
                if let Some(m) = &pass.masks[3 + l] {
                    da *= m;
                }
                dg = da * &pass.gz[l - 1].mapv(elu_grad);
            }
        }
        gating_grads.reverse();

        let mut grads = Vec::new();
        for (w, b) in gating_grads.into_iter().chain(layer_grads) {
            grads.push(w);
            grads.push(b);
        }
        (loss, grads)
    }

    /// Deterministic (no dropout) loss and flattened gradient on normalized rows.
    pub fn loss_and_gradient(&self, x: &Array2<f64>, g: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<f64>) {
        let pass = self.forward_batch(x, g, None);
        let (loss, grads) = self.backward_batch(&pass, y);
        (loss, grads.into_iter().flatten().collect())
    }

    /// Deterministic MSE on normalized rows.
    pub fn batch_loss(&self, x: &Array2<f64>, g: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let pass = self.forward_batch(x, g, None);
        let d = &pass.out - y;
        d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
    }
}

fn normalized_rows(store: &TensorStore, rows: &[usize]) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let take = |data: &Array2<f32>, norm: &crate::features::Normalization| {
        let mut out = Array2::zeros((rows.len(), data.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&Array1::from(norm.normalized(data.row(r))));
        }
        out
    };
    (
        take(&store.inputs, &store.input_norm),
        take(&store.gating, &store.gating_norm),
        take(&store.outputs, &store.output_norm),
    )
}

/// Train a fresh model on `store`.
pub fn train(store: &TensorStore, cfg: &TrainConfig) -> Result<(Moe, TrainReport)> {
    let mut model = Moe::new(store.dims, cfg.network.clone())?;
    model.input_norm = store.input_norm.clone();
    model.gating_norm = store.gating_norm.clone();
    model.output_norm = store.output_norm.clone();
    model.config_hash = cfg.hash();
    model.train_config = Some(cfg.clone());

    let held_out = cfg
        .validation_clip
        .as_ref()
        .map(|name| {
            store
                .clips
                .iter()
                .find(|c| &c.name == name)
                .map(|c| c.start..c.start + c.count)
                .ok_or_else(|| Error::InvalidArgument(format!("validation clip `{name}` not in the dataset")))
        })
        .transpose()?;
    let (mut train_rows, val_rows): (Vec<usize>, Vec<usize>) =
        (0..store.rows()).partition(|r| held_out.as_ref().map_or(true, |h| !h.contains(r)));
    if train_rows.is_empty() {
        return Err(Error::InvalidArgument("no training rows".into()));
    }

    let sizes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = Adam::new(cfg.adam.clone(), &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batches = train_rows.len().div_ceil(cfg.batch.max(1));
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        train_rows.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in train_rows.chunks(cfg.batch.max(1)).enumerate() {
            let (x, g, y) = normalized_rows(store, chunk);
            let pass = model.forward_batch(&x, &g, Some(&mut rng));
            let (loss, grads) = model.backward_batch(&pass, &y);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            let mult = cfg.restarts.multiplier(epoch as f64 + b as f64 / batches as f64);
            let refs: Vec<&[f64]> = grads.iter().map(|v| v.as_slice()).collect();
            adam.step(&mut model.param_slices_mut(), &refs, mult);
            report.steps += 1;
        }
        let mean = total / train_rows.len() as f64;
        report.epoch_losses.push(mean);
        if !val_rows.is_empty() {
            let mut vt = 0.0;
            for chunk in val_rows.chunks(256) {
                let (x, g, y) = normalized_rows(store, chunk);
                vt += model.batch_loss(&x, &g, &y) * chunk.len() as f64;
            }
            report.validation_losses.push(vt / val_rows.len() as f64);
        }
        log::info!(
            "epoch {epoch}: loss {mean:.6}{}",
            report.validation_losses.last().map_or(String::new(), |v| format!(", validation {v:.6}"))
        );
    }
    Ok((model, report))
}
