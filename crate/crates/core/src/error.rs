use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the in-betweening pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("header declares {expected} frames but {found} were read")]
    FrameCount { expected: usize, found: usize },

    #[error("skeleton is missing required bone `{0}`")]
    MissingBone(String),

    #[error("bone `{0}` has no mirrored counterpart")]
    MirrorPairing(String),

    #[error("subject identifier {0} is outside 1..=5")]
    InvalidSubject(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rotation vectors are nearly parallel ({angle_deg:.3} deg apart)")]
    NearParallel { angle_deg: f64 },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("NaN feature in clip `{clip}`, frame {frame}, feature index {feature}")]
    NanFeature {
        clip: String,
        frame: usize,
        feature: usize,
    },

    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
