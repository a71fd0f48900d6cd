//! Model checkpoints: `SSCK`, a u32 little-endian header length, a JSON
//! header, then every tensor as little-endian f32 in declaration order.
//! Weights are stored at f32 precision, so a reloaded model reproduces
//! predictions to about 1e-6, not bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use socialsense_core::fsd::{FrameClassifier, FsdModel};
use socialsense_core::meta::MetaLearner;
use socialsense_core::multimodal::{FusionConfig, FusionModel};

use crate::error::{Error, IoContext, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SSCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// `fsd` or `fusion`.
    pub kind: String,
    #[serde(default)]
    pub algorithm: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub epoch: Option<usize>,
    /// Length of each tensor.
    pub shapes: Vec<usize>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub extra: serde_json::Value,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.into(), reason: reason.into() }
}

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, tensors: &[Vec<f64>]) -> Result<()> {
    if header.shapes != tensors.iter().map(Vec::len).collect::<Vec<_>>() {
        return Err(format_err(path, "header shapes do not match tensors"));
    }
    let json = serde_json::to_vec(header).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    let n: usize = header.shapes.iter().sum();
    let mut out = Vec::with_capacity(8 + json.len() + 4 * n);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in tensors.iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, out).at(path)
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<Vec<f64>>)> {
    let bytes = fs::read(path).at(path)?;
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(format_err(path, "not a checkpoint (bad magic)"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| format_err(path, "truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    let mut data = bytes[8 + hlen..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let total: usize = header.shapes.iter().sum();
    if bytes.len() - 8 - hlen != 4 * total {
        return Err(format_err(path, format!("expected {total} f32 values, found {} bytes", bytes.len() - 8 - hlen)));
    }
    let tensors = header.shapes.iter().map(|&n| data.by_ref().take(n).collect()).collect();
    Ok((header, tensors))
}

fn expect_kind(path: &Path, header: &CheckpointHeader, kind: &str) -> Result<()> {
    if header.kind != kind {
        return Err(format_err(path, format!("expected a {kind} checkpoint, found {}", header.kind)));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FsdShape {
    dim: usize,
    hidden: Vec<usize>,
}

pub fn save_fsd(path: &Path, model: &mut FsdModel, seed: u64) -> Result<()> {
    let tensors = model.classifier.export();
    let header = CheckpointHeader {
        kind: "fsd".into(),
        algorithm: Some(serde_json::to_value(model.meta.algorithm).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()),
        seed,
        epoch: Some(model.classifier.history.best_epoch),
        shapes: tensors.iter().map(Vec::len).collect(),
        config: serde_json::to_value(FsdShape { dim: model.classifier.dim, hidden: model.classifier.hidden.clone() })
            .expect("plain struct"),
        extra: serde_json::to_value(&model.meta).expect("plain struct"),
    };
    write_checkpoint(path, &header, &tensors)
}

pub fn load_fsd(path: &Path) -> Result<FsdModel> {
    let (header, tensors) = read_checkpoint(path)?;
    expect_kind(path, &header, "fsd")?;
    let shape: FsdShape = serde_json::from_value(header.config).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    let meta: MetaLearner = serde_json::from_value(header.extra).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    let mut classifier = FrameClassifier::untrained(shape.dim, &shape.hidden, 0);
    classifier.import(&tensors)?;
    Ok(FsdModel { classifier, meta })
}

pub fn save_fusion(path: &Path, model: &mut FusionModel, seed: u64) -> Result<()> {
    let tensors = model.export();
    let header = CheckpointHeader {
        kind: "fusion".into(),
        algorithm: Some(model.config.ablation.name().into()),
        seed,
        epoch: Some(model.history.best_epoch),
        shapes: tensors.iter().map(Vec::len).collect(),
        config: serde_json::to_value(&model.config).expect("plain struct"),
        extra: serde_json::to_value(&model.history).expect("plain struct"),
    };
    write_checkpoint(path, &header, &tensors)
}

pub fn load_fusion(path: &Path) -> Result<FusionModel> {
    let (header, tensors) = read_checkpoint(path)?;
    expect_kind(path, &header, "fusion")?;
    let config: FusionConfig = serde_json::from_value(header.config).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    let mut model = FusionModel::new(&config, header.seed)?;
    model.import(&tensors)?;
    if let Ok(history) = serde_json::from_value(header.extra) {
        model.history = history;
    }
    Ok(model)
}
