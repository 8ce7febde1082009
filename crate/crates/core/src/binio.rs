//! Little-endian float blobs with a JSON header.
//!
//! Layout of a framed file: `u64` LE header byte length, the UTF-8 JSON
//! header, then the arrays the header declares as contiguous `f32` (or
//! `f64`) little-endian values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArraySpec {
    pub fn new(name: &str, shape: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_f32s(w: &mut impl Write, values: impl IntoIterator<Item = f32>) -> Result<()> {
    let mut buf = Vec::new();
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_f64s(w: &mut impl Write, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut buf = Vec::new();
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Write a framed header followed by raw payload bytes produced by `body`.
pub fn write_framed<H: Serialize>(
    path: impl AsRef<Path>,
    header: &H,
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(json.len() + 8);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    body(&mut out)?;
    std::fs::write(path, out)?;
    Ok(())
}

/// Read the header of a framed file and return it with the remaining payload reader.
pub fn read_framed<H: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(H, std::io::Cursor<Vec<u8>>)> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::Format("file too short for a framed header".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + len {
        return Err(Error::Format("truncated header".into()));
    }
    let header = serde_json::from_slice(&bytes[8..8 + len])?;
    let mut cursor = std::io::Cursor::new(bytes);
    cursor.set_position((8 + len) as u64);
    Ok((header, cursor))
}
