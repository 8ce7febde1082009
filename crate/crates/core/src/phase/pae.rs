//! Periodic autoencoder over multi-channel velocity windows.
//!
//! Encoder: conv(D->H, k1) then conv(H->C, k2), no activation, replicate
//! padding. Each latent curve is parameterized by frequency, amplitude and
//! bias from its discrete spectrum, and by a phase angle from a per-channel
//! linear projection followed by atan2. The decoder reconstructs from the
//! sinusoids `A sin(2 pi F t + theta) + B` with conv(C->H, k2), ELU and
//! conv(H->D, k1). Convolutions run as im2col GEMMs over a whole batch.

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fft::DftBasis;
use super::PhaseParams;
use crate::binio::{read_f64s, read_framed, write_f64s, write_framed, ArraySpec};
use crate::error::{Error, Result};
use crate::math::wrap_angle;
use crate::optim::{Adam, AdamConfig};

pub const PAE_FORMAT: &str = "inbetween-pae";
pub const PAE_VERSION: u32 = 1;
const POWER_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaeConfig {
    /// Input channels D (3 per joint for velocity windows).
    pub input_channels: usize,
    /// Intermediate width H; defaults to D.
    pub hidden: usize,
    /// Latent phase channels C.
    pub channels: usize,
    /// Window length N in frames.
    pub window: usize,
    pub fps: f64,
    pub kernel: usize,
    pub latent_kernel: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl PaeConfig {
    pub fn new(input_channels: usize) -> Self {
        Self {
            input_channels,
            hidden: input_channels,
            channels: super::PHASE_CHANNELS,
            window: super::WINDOW_FRAMES,
            fps: 30.0,
            kernel: 31,
            latent_kernel: 3,
            learning_rate: 1e-3,
            batch: 32,
            epochs: 10,
            seed: 0,
        }
    }

    /// Sample times (s) relative to the window center.
    pub fn times(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        (0..self.window).map(|n| (n as f64 - c) / self.fps).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Conv {
    cin: usize,
    cout: usize,
    k: usize,
    /// `[cout, cin * k]`
    w: Array2<f64>,
    b: Array1<f64>,
}

impl Conv {
    fn new(cin: usize, cout: usize, k: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((cin * k) as f64).sqrt();
        Self {
            cin,
            cout,
            k,
            w: Array2::from_shape_fn((cout, cin * k), |_| rng.gen_range(-bound..bound)),
            b: Array1::from_shape_fn(cout, |_| rng.gen_range(-bound..bound)),
        }
    }

    /// `[cin * k, B * n]` columns with replicate padding inside each window.
    fn im2col(&self, x: &Array2<f64>, n: usize) -> Array2<f64> {
        let cols = x.ncols();
        let h = (self.k / 2) as isize;
        let mut out = Array2::zeros((self.cin * self.k, cols));
        for i in 0..self.cin {
            let row = x.row(i);
            for j in 0..self.k {
                let mut o = out.row_mut(i * self.k + j);
                for start in (0..cols).step_by(n) {
                    for t in 0..n {
                        let src = (t as isize + j as isize - h).clamp(0, n as isize - 1) as usize;
                        o[start + t] = row[start + src];
                    }
                }
            }
        }
        out
    }

    fn col2im(&self, dcols: &Array2<f64>, n: usize) -> Array2<f64> {
        let cols = dcols.ncols();
        let h = (self.k / 2) as isize;
        let mut dx = Array2::zeros((self.cin, cols));
        for i in 0..self.cin {
            let mut d = dx.row_mut(i);
            for j in 0..self.k {
                let g = dcols.row(i * self.k + j);
                for start in (0..cols).step_by(n) {
                    for t in 0..n {
                        let src = (t as isize + j as isize - h).clamp(0, n as isize - 1) as usize;
                        d[start + src] += g[start + t];
                    }
                }
            }
        }
        dx
    }

    fn forward(&self, x: &Array2<f64>, n: usize) -> (Array2<f64>, Array2<f64>) {
        let cols = self.im2col(x, n);
        let mut y = self.w.dot(&cols);
        for (mut row, b) in y.rows_mut().into_iter().zip(&self.b) {
            row += *b;
        }
        (cols, y)
    }

    /// Returns `(dw, db, dx)`.
    fn backward(&self, cols: &Array2<f64>, dy: &Array2<f64>, n: usize, need_dx: bool) -> (Array2<f64>, Array1<f64>, Option<Array2<f64>>) {
        let dw = dy.dot(&cols.t());
        let db = dy.sum_axis(Axis(1));
        let dx = need_dx.then(|| self.col2im(&self.w.t().dot(dy), n));
        (dw, db, dx)
    }
}

/// Trained periodic autoencoder.
#[derive(Clone, Debug)]
pub struct Pae {
    pub cfg: PaeConfig,
    /// Per-input-channel divisor applied before encoding.
    pub scale: Vec<f64>,
    enc1: Conv,
    enc2: Conv,
    /// `[2C, N]` phase projections, rows `(2c, 2c + 1)` for channel `c`.
    fc_w: Array2<f64>,
    fc_b: Array1<f64>,
    dec1: Conv,
    dec2: Conv,
    basis: DftBasis,
}

/// Intermediate values of one batched forward pass.
struct Forward {
    n: usize,
    batch: usize,
    x: Array2<f64>,
    cols1: Array2<f64>,
    cols2: Array2<f64>,
    latent: Array2<f64>,
    /// `[C, B]`
    freq: Array2<f64>,
    amp: Array2<f64>,
    bias: Array2<f64>,
    theta: Array2<f64>,
    power_sum: Array2<f64>,
    /// Spectrum per `(c, b)`: real and imaginary parts and power per bin.
    spectra: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Phase projections per `(c, b)`.
    proj: Vec<[f64; 2]>,
    cols3: Array2<f64>,
    z: Array2<f64>,
    cols4: Array2<f64>,
    out: Array2<f64>,
}

struct Grads {
    enc1: (Array2<f64>, Array1<f64>),
    enc2: (Array2<f64>, Array1<f64>),
    fc: (Array2<f64>, Array1<f64>),
    dec1: (Array2<f64>, Array1<f64>),
    dec2: (Array2<f64>, Array1<f64>),
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl Pae {
    pub fn new(cfg: PaeConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (d, h, c, n) = (cfg.input_channels, cfg.hidden, cfg.channels, cfg.window);
        let enc1 = Conv::new(d, h, cfg.kernel, &mut rng);
        let enc2 = Conv::new(h, c, cfg.latent_kernel, &mut rng);
        let bound = 1.0 / (n as f64).sqrt();
        let fc_w = Array2::from_shape_fn((2 * c, n), |_| rng.gen_range(-bound..bound));
        let fc_b = Array1::from_shape_fn(2 * c, |_| rng.gen_range(-bound..bound));
        let dec1 = Conv::new(c, h, cfg.latent_kernel, &mut rng);
        let dec2 = Conv::new(h, d, cfg.kernel, &mut rng);
        let basis = DftBasis::new(n, cfg.fps);
        Self {
            scale: vec![1.0; d],
            cfg,
            enc1,
            enc2,
            fc_w,
            fc_b,
            dec1,
            dec2,
            basis,
        }
    }

    fn check(&self, w: &ArrayView2<f64>) -> Result<()> {
        if w.nrows() != self.cfg.input_channels {
            return Err(Error::Shape { context: "velocity window channels", expected: self.cfg.input_channels, found: w.nrows() });
        }
        if w.ncols() != self.cfg.window {
            return Err(Error::Shape { context: "velocity window length", expected: self.cfg.window, found: w.ncols() });
        }
        Ok(())
    }

    /// Stack windows side by side as `[D, B * N]`, divided by the input scale.
    fn stack(&self, windows: &[ArrayView2<f64>]) -> Array2<f64> {
        let n = self.cfg.window;
        let mut x = Array2::zeros((self.cfg.input_channels, windows.len() * n));
        for (b, w) in windows.iter().enumerate() {
            x.slice_mut(s![.., b * n..(b + 1) * n]).assign(w);
        }
        for (mut row, s) in x.rows_mut().into_iter().zip(&self.scale) {
            row /= *s;
        }
        x
    }

    fn forward(&self, x: Array2<f64>) -> Forward {
        let n = self.cfg.window;
        let c = self.cfg.channels;
        let batch = x.ncols() / n;
        let (cols1, h1) = self.enc1.forward(&x, n);
        let (cols2, latent) = self.enc2.forward(&h1, n);
        let times = self.cfg.times();
        let basis = &self.basis;
        let mut freq = Array2::zeros((c, batch));
        let mut amp = Array2::zeros((c, batch));
        let mut bias = Array2::zeros((c, batch));
        let mut theta = Array2::zeros((c, batch));
        let mut power_sum = Array2::zeros((c, batch));
        let mut spectra = Vec::with_capacity(c * batch);
        let mut proj = Vec::with_capacity(c * batch);
        let mut sig = Array2::zeros((c, batch * n));
        for ch in 0..c {
            for b in 0..batch {
                let y = latent.slice(s![ch, b * n..(b + 1) * n]);
                let mut re = vec![0.0; basis.bins];
                let mut im = vec![0.0; basis.bins];
                let mut p = vec![0.0; basis.bins];
                for k in 0..basis.bins {
                    let (cs, sn) = (&basis.cos[k], &basis.sin[k]);
                    let (mut r, mut i) = (0.0, 0.0);
                    for t in 0..n {
                        r += y[t] * cs[t];
                        i -= y[t] * sn[t];
                    }
                    re[k] = r;
                    im[k] = i;
                    p[k] = r * r + i * i;
                }
                let total: f64 = p.iter().sum::<f64>() + POWER_EPS;
                let f = p.iter().zip(&basis.freqs).map(|(p, f)| p * f).sum::<f64>() / total;
                let a = 2.0 * total.sqrt() / n as f64;
                let bb = y.sum() / n as f64;
                let v0 = self.fc_b[2 * ch] + self.fc_w.row(2 * ch).dot(&y);
                let v1 = self.fc_b[2 * ch + 1] + self.fc_w.row(2 * ch + 1).dot(&y);
                let th = v1.atan2(v0);
                freq[[ch, b]] = f;
                amp[[ch, b]] = a;
                bias[[ch, b]] = bb;
                theta[[ch, b]] = th;
                power_sum[[ch, b]] = total;
                spectra.push((re, im, p));
                proj.push([v0, v1]);
                for (t, tt) in times.iter().enumerate() {
                    sig[[ch, b * n + t]] = a * (TAU * f * tt + th).sin() + bb;
                }
            }
        }
        let (cols3, z) = self.dec1.forward(&sig, n);
        let act = z.mapv(elu);
        let (cols4, out) = self.dec2.forward(&act, n);
        Forward {
            n,
            batch,
            x,
            cols1,
            cols2,
            latent,
            freq,
            amp,
            bias,
            theta,
            power_sum,
            spectra,
            proj,
            cols3,
            z,
            cols4,
            out,
        }
    }

    fn backward(&self, fw: &Forward) -> (f64, Grads) {
        let (n, batch, c) = (fw.n, fw.batch, self.cfg.channels);
        let diff = &fw.out - &fw.x;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / count;
        let dout = diff * (2.0 / count);

        let (dw4, db4, da) = self.dec2.backward(&fw.cols4, &dout, n, true);
        let dz = da.unwrap() * &fw.z.mapv(elu_grad);
        let (dw3, db3, dsig) = self.dec1.backward(&fw.cols3, &dz, n, true);
        let dsig = dsig.unwrap();

        let times = self.cfg.times();
        let basis = &self.basis;
        let mut dlatent = Array2::zeros((c, batch * n));
        let mut dfc_w = Array2::zeros(self.fc_w.raw_dim());
        let mut dfc_b = Array1::zeros(self.fc_b.raw_dim());
        for ch in 0..c {
            for b in 0..batch {
                let (f, a, th) = (fw.freq[[ch, b]], fw.amp[[ch, b]], fw.theta[[ch, b]]);
                let (mut da_, mut df, mut dth, mut db_) = (0.0, 0.0, 0.0, 0.0);
                for (t, tt) in times.iter().enumerate() {
                    let g = dsig[[ch, b * n + t]];
                    let arg = TAU * f * tt + th;
                    let (sn, cs) = arg.sin_cos();
                    da_ += g * sn;
                    df += g * a * cs * TAU * tt;
                    dth += g * a * cs;
                    db_ += g;
                }
                let idx = ch * batch + b;
                let y = fw.latent.slice(s![ch, b * n..(b + 1) * n]);
                let mut dy = vec![db_ / n as f64; n];

                let [v0, v1] = fw.proj[idx];
                let r2 = v0 * v0 + v1 * v1 + 1e-300;
                let dv = [-v1 / r2 * dth, v0 / r2 * dth];
                for (j, d) in dv.iter().enumerate() {
                    let row = 2 * ch + j;
                    dfc_b[row] += d;
                    dfc_w.row_mut(row).scaled_add(*d, &y);
                    for t in 0..n {
                        dy[t] += d * self.fc_w[[row, t]];
                    }
                }

                let total = fw.power_sum[[ch, b]];
                let ds = da_ / (n as f64 * total.sqrt());
                let (re, im, _) = &fw.spectra[idx];
                for k in 0..basis.bins {
                    let dp = ds + df * (basis.freqs[k] - f) / total;
                    let (dre, dim) = (2.0 * re[k] * dp, 2.0 * im[k] * dp);
                    let (cs, sn) = (&basis.cos[k], &basis.sin[k]);
                    for t in 0..n {
                        dy[t] += dre * cs[t] - dim * sn[t];
                    }
                }
                dlatent.slice_mut(s![ch, b * n..(b + 1) * n]).assign(&Array1::from(dy));
            }
        }

        let (dw2, db2, dh1) = self.enc2.backward(&fw.cols2, &dlatent, n, true);
        let (dw1, db1, _) = self.enc1.backward(&fw.cols1, &dh1.unwrap(), n, false);
        (
            loss,
            Grads {
                enc1: (dw1, db1),
                enc2: (dw2, db2),
                fc: (dfc_w, dfc_b),
                dec1: (dw3, db3),
                dec2: (dw4, db4),
            },
        )
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for conv in [&mut self.enc1, &mut self.enc2] {
            out.push(conv.w.as_slice_mut().unwrap());
            out.push(conv.b.as_slice_mut().unwrap());
        }
        out.push(self.fc_w.as_slice_mut().unwrap());
        out.push(self.fc_b.as_slice_mut().unwrap());
        for conv in [&mut self.dec1, &mut self.dec2] {
            out.push(conv.w.as_slice_mut().unwrap());
            out.push(conv.b.as_slice_mut().unwrap());
        }
        out
    }

    fn param_arrays(&self) -> Vec<(&str, Vec<usize>, &[f64])> {
        fn conv(c: &Conv) -> [&[f64]; 2] {
            [c.w.as_slice().unwrap(), c.b.as_slice().unwrap()]
        }
        let mut out = Vec::new();
        for (name, c) in [("enc1", &self.enc1), ("enc2", &self.enc2)] {
            let [w, b] = conv(c);
            out.push((name, vec![c.cout, c.cin * c.k], w));
            out.push((name, vec![c.cout], b));
        }
        out.push(("fc", vec![self.fc_w.nrows(), self.fc_w.ncols()], self.fc_w.as_slice().unwrap()));
        out.push(("fc", vec![self.fc_b.len()], self.fc_b.as_slice().unwrap()));
        for (name, c) in [("dec1", &self.dec1), ("dec2", &self.dec2)] {
            let [w, b] = conv(c);
            out.push((name, vec![c.cout, c.cin * c.k], w));
            out.push((name, vec![c.cout], b));
        }
        out
    }

    /// Mean squared reconstruction error of a batch, in scaled units.
    pub fn loss(&self, windows: &[ArrayView2<f64>]) -> Result<f64> {
        for w in windows {
            self.check(w)?;
        }
        let fw = self.forward(self.stack(windows));
        let d = &fw.out - &fw.x;
        Ok(d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64)
    }

    fn params_at(&self, fw: &Forward, b: usize) -> PhaseParams {
        let c = self.cfg.channels;
        PhaseParams {
            amplitude: (0..c).map(|ch| fw.amp[[ch, b]]).collect(),
            frequency: (0..c).map(|ch| fw.freq[[ch, b]]).collect(),
            bias: (0..c).map(|ch| fw.bias[[ch, b]]).collect(),
            phase: (0..c).map(|ch| wrap_angle(fw.theta[[ch, b]])).collect(),
        }
    }

    /// Latent curves `[C, N]` and phase parameters at the window center.
    pub fn encode(&self, window: ArrayView2<f64>) -> Result<(Array2<f64>, PhaseParams)> {
        self.check(&window)?;
        let fw = self.forward(self.stack(&[window]));
        Ok((fw.latent.clone(), self.params_at(&fw, 0)))
    }

    /// Phase parameters for many windows, evaluated in chunks.
    pub fn encode_batch(&self, windows: &[ArrayView2<f64>]) -> Result<Vec<PhaseParams>> {
        for w in windows {
            self.check(w)?;
        }
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(256) {
            let fw = self.forward(self.stack(chunk));
            out.extend((0..chunk.len()).map(|b| self.params_at(&fw, b)));
        }
        Ok(out)
    }

    /// Decoded reconstruction of one window in input units.
    pub fn reconstruct(&self, window: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&window)?;
        let mut out = self.forward(self.stack(&[window])).out;
        for (mut row, s) in out.rows_mut().into_iter().zip(&self.scale) {
            row *= *s;
        }
        Ok(out)
    }

    /// Per-channel RMS over the data, used as the input divisor.
    pub fn fit_scale(&mut self, windows: &[ArrayView2<f64>]) {
        let d = self.cfg.input_channels;
        let mut sq = vec![0.0; d];
        let mut count = 0.0;
        for w in windows {
            for (i, row) in w.rows().into_iter().enumerate() {
                sq[i] += row.iter().map(|v| v * v).sum::<f64>();
            }
            count += w.ncols() as f64;
        }
        self.scale = sq
            .iter()
            .map(|s| {
                let rms = (s / count.max(1.0)).sqrt();
                if rms > 1e-6 {
                    rms
                } else {
                    1.0
                }
            })
            .collect();
    }

    /// Mean loss and the gradient flattened in parameter order, for checks.
    pub fn loss_and_gradient(&self, windows: &[ArrayView2<f64>]) -> (f64, Vec<f64>) {
        let fw = self.forward(self.stack(windows));
        let (loss, g) = self.backward(&fw);
        (loss, flatten_grads(&g))
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.param_arrays().iter().flat_map(|(_, _, v)| v.iter().copied()).collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.param_arrays().iter().map(|(_, _, v)| v.len()).sum();
        if values.len() != total {
            return Err(Error::Shape { context: "autoencoder parameters", expected: total, found: values.len() });
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let arrays: Vec<ArraySpec> = self.param_arrays().iter().map(|(n, s, _)| ArraySpec::new(n, s)).collect();
        let header = PaeHeader {
            format: PAE_FORMAT.into(),
            version: PAE_VERSION,
            endianness: "LE".into(),
            config: self.cfg.clone(),
            scale: self.scale.clone(),
            arrays,
        };
        let values = self.parameters();
        write_framed(path, &header, |out| write_f64s(out, values))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (h, mut r): (PaeHeader, _) = read_framed(path)?;
        if h.format != PAE_FORMAT || h.version != PAE_VERSION || h.endianness != "LE" {
            return Err(Error::Format(format!("{} v{}", h.format, h.version)));
        }
        let mut pae = Pae::new(h.config);
        let expected: Vec<ArraySpec> = pae.param_arrays().iter().map(|(n, s, _)| ArraySpec::new(n, s)).collect();
        if expected != h.arrays || h.scale.len() != pae.cfg.input_channels {
            return Err(Error::Format("autoencoder checkpoint layout does not match its config".into()));
        }
        let total = expected.iter().map(ArraySpec::len).sum();
        pae.set_parameters(&read_f64s(&mut r, total)?)?;
        pae.scale = h.scale;
        Ok(pae)
    }
}

#[derive(Serialize, Deserialize)]
struct PaeHeader {
    format: String,
    version: u32,
    endianness: String,
    config: PaeConfig,
    scale: Vec<f64>,
    arrays: Vec<ArraySpec>,
}

fn flatten_grads(g: &Grads) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in [&g.enc1, &g.enc2, &g.fc, &g.dec1, &g.dec2] {
        out.extend(w.iter());
        out.extend(b.iter());
    }
    out
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Train on `windows` (each `[D, N]`). Input scale is fitted first.
pub fn train_pae(windows: &[Array2<f64>], cfg: &PaeConfig) -> Result<(Pae, TrainReport)> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument("no training windows".into()));
    }
    let mut pae = Pae::new(cfg.clone());
    let views: Vec<ArrayView2<f64>> = windows.iter().map(|w| w.view()).collect();
    for w in &views {
        pae.check(w)?;
    }
    pae.fit_scale(&views);
    let sizes: Vec<usize> = pae.params_mut().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(AdamConfig { learning_rate: cfg.learning_rate, ..Default::default() }, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let mut order: Vec<usize> = (0..views.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let batch: Vec<ArrayView2<f64>> = chunk.iter().map(|&i| views[i]).collect();
            let fw = pae.forward(pae.stack(&batch));
            let (loss, g) = pae.backward(&fw);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            let grads = flatten_grads_slices(&g);
            let grad_refs: Vec<&[f64]> = grads.iter().map(|v| v.as_slice()).collect();
            adam.step(&mut pae.params_mut(), &grad_refs, 1.0);
        }
        let mean = total / views.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        log::info!("autoencoder epoch {epoch}: loss {mean:.6}");
        report.epoch_losses.push(mean);
    }
    Ok((pae, report))
}

fn flatten_grads_slices(g: &Grads) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (w, b) in [&g.enc1, &g.enc2, &g.fc, &g.dec1, &g.dec2] {
        out.push(w.iter().copied().collect());
        out.push(b.iter().copied().collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PaeConfig {
        PaeConfig {
            input_channels: 2,
            hidden: 3,
            channels: 2,
            window: 15,
            fps: 30.0,
            kernel: 5,
            latent_kernel: 3,
            learning_rate: 1e-3,
            batch: 4,
            epochs: 1,
            seed: 7,
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = tiny();
        let mut pae = Pae::new(cfg.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let windows: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_fn((2, 15), |_| rng.gen_range(-1.0..1.0)))
            .collect();
        let views: Vec<_> = windows.iter().map(|w| w.view()).collect();
        let (_, grad) = pae.loss_and_gradient(&views);
        let base = pae.parameters();
        let h = 1e-6;
        for idx in (0..base.len()).step_by(7) {
            let mut p = base.clone();
            p[idx] += h;
            pae.set_parameters(&p).unwrap();
            let up = pae.loss(&views).unwrap();
            p[idx] -= 2.0 * h;
            pae.set_parameters(&p).unwrap();
            let down = pae.loss(&views).unwrap();
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[idx]).abs() / (fd.abs().max(grad[idx].abs()).max(1e-6));
            assert!(err < 1e-4, "param {idx}: analytic {} vs numeric {fd}", grad[idx]);
        }
        pae.set_parameters(&base).unwrap();
    }

    #[test]
    fn checkpoint_round_trip() {
        let pae = Pae::new(tiny());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pae.bin");
        pae.save(&path).unwrap();
        let back = Pae::load(&path).unwrap();
        assert_eq!(back.parameters(), pae.parameters());
        assert_eq!(back.cfg, pae.cfg);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let pae = Pae::new(tiny());
        let w = Array2::zeros((3, 15));
        assert!(matches!(pae.encode(w.view()), Err(Error::Shape { .. })));
    }
}
