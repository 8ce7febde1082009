//! Motion in-betweening on learned phase manifolds: motion data handling,
//! feature extraction, a periodic autoencoder, a gated mixture-of-experts
//! predictor, the autoregressive runtime and evaluation metrics.

pub mod binio;
pub mod error;
pub mod eval;
pub mod features;
pub mod math;
pub mod motion;
pub mod network;
pub mod optim;
pub mod phase;
pub mod pipeline;
pub mod runtime;
pub mod synth;

pub use error::{Error, Result};
