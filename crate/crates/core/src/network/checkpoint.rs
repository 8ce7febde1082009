//! Versioned binary checkpoint: framed JSON header plus little-endian f64 payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Moe, MoeConfig, TrainConfig};
use crate::binio::{read_f64s, read_framed, write_f64s, write_framed, ArraySpec};
use crate::error::{Error, Result};
use crate::features::{Dims, Normalization};

pub const MOE_FORMAT: &str = "inbetween-moe";
pub const MOE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MoeHeader {
    format: String,
    version: u32,
    endianness: String,
    dims: Dims,
    style_dims: usize,
    config: MoeConfig,
    config_hash: String,
    train_config: Option<TrainConfig>,
    input_norm: Normalization,
    gating_norm: Normalization,
    output_norm: Normalization,
    arrays: Vec<ArraySpec>,
}

fn array_specs(m: &Moe) -> Vec<ArraySpec> {
    let mut out = Vec::new();
    for (i, d) in m.gating.iter().enumerate() {
        out.push(ArraySpec::new(&format!("gating{i}.w"), d.w.shape()));
        out.push(ArraySpec::new(&format!("gating{i}.b"), d.b.shape()));
    }
    for (i, l) in m.layers.iter().enumerate() {
        out.push(ArraySpec::new(&format!("expert{i}.w"), l.w.shape()));
        out.push(ArraySpec::new(&format!("expert{i}.b"), l.b.shape()));
    }
    out
}

impl Moe {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = MoeHeader {
            format: MOE_FORMAT.into(),
            version: MOE_VERSION,
            endianness: "LE".into(),
            dims: self.dims,
            style_dims: self.dims.style,
            config: self.cfg.clone(),
            config_hash: self.config_hash.clone(),
            train_config: self.train_config.clone(),
            input_norm: self.input_norm.clone(),
            gating_norm: self.gating_norm.clone(),
            output_norm: self.output_norm.clone(),
            arrays: array_specs(self),
        };
        let values = self.parameters();
        write_framed(path, &header, |out| write_f64s(out, values))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (h, mut r): (MoeHeader, _) = read_framed(path)?;
        if h.format != MOE_FORMAT || h.version != MOE_VERSION || h.endianness != "LE" {
            return Err(Error::Format(format!("{} v{}", h.format, h.version)));
        }
        if let Some(tc) = &h.train_config {
            if tc.hash() != h.config_hash {
                return Err(Error::Format("checkpoint config hash does not match its training config".into()));
            }
        }
        let mut m = Moe::with_widths(h.dims, h.config);
        if array_specs(&m) != h.arrays
            || h.input_norm.mean.len() != m.cfg.input
            || h.gating_norm.mean.len() != m.cfg.gating_input
            || h.output_norm.mean.len() != m.cfg.output
        {
            return Err(Error::Format("network checkpoint layout does not match its config".into()));
        }
        let total = h.arrays.iter().map(ArraySpec::len).sum();
        m.set_parameters(&read_f64s(&mut r, total)?)?;
        m.input_norm = h.input_norm;
        m.gating_norm = h.gating_norm;
        m.output_norm = h.output_norm;
        m.config_hash = h.config_hash;
        m.train_config = h.train_config;
        Ok(m)
    }
}
