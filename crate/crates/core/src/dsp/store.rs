//! `SPGM` binary spectrogram format: magic `b"SPGM"`, `version: u16`,
//! `rows: u32`, `cols: u32`, then row-major little-endian f32 values.

use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

pub const SPGM_MAGIC: &[u8; 4] = b"SPGM";
pub const SPGM_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn encode_spgm(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data.len() * 4);
    out.extend_from_slice(SPGM_MAGIC);
    out.extend_from_slice(&SPGM_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    for &v in &m.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_spgm(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != SPGM_MAGIC {
        return Err(Error::Format("missing SPGM header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SPGM_VERSION {
        return Err(Error::Format(format!("unsupported SPGM version {version}")));
    }
    let rows = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let cols = u32::from_le_bytes([bytes[10], bytes[11], bytes[12], bytes[13]]) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * 4 {
        return Err(Error::Format(format!(
            "SPGM body has {} bytes, expected {} for {rows}x{cols}",
            body.len(),
            rows * cols * 4
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Matrix { rows, cols, data })
}
