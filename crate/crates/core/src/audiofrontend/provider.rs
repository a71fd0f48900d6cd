use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AudioFrame, FrameEmbedding, FrameScores, NUM_CLASSES};
use crate::rng::{derive_seed, seeded};
use crate::sensorstream::{ProbeWindow, SensorKind};
use crate::{math, Error, Result};

/// Frames per one-second slot (two 0.48 s frames).
pub const FRAMES_PER_SLOT: usize = 2;

/// Source of per-frame embeddings and class scores for a probe.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;

    /// Returns two frames per second of the probe window.
    fn embed_probe(&self, probe: &ProbeWindow) -> Result<Vec<AudioFrame>>;
}

/// Turns the scenario's per-second audio descriptors `[class, foreground]`
/// into deterministic frames.
///
/// Scores put the descriptor's class on top in both frames. Embeddings are
/// isotropic Gaussian noise shifted by `±separation/2` along a fixed unit
/// direction depending on the foreground flag. With probability `mixed_rate`
/// one frame of a foreground slot is drawn from the background cluster,
/// which mimics mixed-speaker seconds.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    dim: usize,
    seed: u64,
    pub separation: f64,
    pub noise_sd: f64,
    pub mixed_rate: f64,
    direction: Vec<f64>,
}

impl SyntheticProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        let mut rng = seeded(derive_seed(seed, 0xD1EC));
        let mut direction: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = math::sqrt(direction.iter().map(|x| x * x).sum());
        direction.iter_mut().for_each(|x| *x /= norm);
        Ok(Self {
            dim,
            seed,
            separation: 6.0,
            noise_sd: 1.0,
            mixed_rate: 0.1,
            direction,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Frames for one second given its descriptor. `key` makes the noise
    /// deterministic per slot.
    pub fn frames_for_slot(&self, key: u64, class: usize, foreground: bool) -> Result<[AudioFrame; 2]> {
        if class >= NUM_CLASSES {
            return Err(Error::InvalidData(format!("class index {class} out of range")));
        }
        let mut rng = seeded(derive_seed(self.seed, key));
        let mixed_frame = if foreground && rng.random::<f64>() < self.mixed_rate {
            Some(rng.random_range(0..FRAMES_PER_SLOT))
        } else {
            None
        };
        let top = [rng.random_range(0.55..0.95), rng.random_range(0.55..0.95)];
        let make = |rng: &mut crate::rng::SeededRng, frame: usize| -> Result<AudioFrame> {
            let fg = foreground && mixed_frame != Some(frame);
            let shift = if fg { self.separation / 2.0 } else { -self.separation / 2.0 };
            let embedding = self
                .direction
                .iter()
                .map(|d| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * self.noise_sd + shift * d
                })
                .collect();
            let mut scores: Vec<f64> = (0..NUM_CLASSES).map(|_| rng.random_range(0.0..0.3)).collect();
            scores[class] = top[frame];
            Ok(AudioFrame {
                embedding: FrameEmbedding(embedding),
                scores: FrameScores::new(scores)?,
            })
        };
        Ok([make(&mut rng, 0)?, make(&mut rng, 1)?])
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_probe(&self, probe: &ProbeWindow) -> Result<Vec<AudioFrame>> {
        let samples = probe.samples_of(SensorKind::AudioFeature);
        let n_slots = (probe.duration_ms() / 1_000) as usize;
        let mut frames = Vec::with_capacity(n_slots * FRAMES_PER_SLOT);
        for slot in 0..n_slots {
            let lo = probe.start + slot as u64 * 1_000;
            let sample = samples
                .iter()
                .find(|s| s.t_ms >= lo && s.t_ms < lo + 1_000)
                .ok_or_else(|| Error::MissingModality("audio-feature".into()))?;
            sample.check_arity(SensorKind::AudioFeature)?;
            let class = sample.values[0] as usize;
            let fg = sample.values[1] > 0.5;
            let [a, b] = self.frames_for_slot(lo, class, fg)?;
            frames.push(a);
            frames.push(b);
        }
        Ok(frames)
    }
}

/// Frames loaded from stored per-probe files, keyed by probe index.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedProvider {
    dim: usize,
    probes: BTreeMap<u64, Vec<AudioFrame>>,
}

impl PrecomputedProvider {
    pub fn new(dim: usize) -> Self {
        Self { dim, probes: BTreeMap::new() }
    }

    pub fn insert(&mut self, probe_index: u64, frames: Vec<AudioFrame>) -> Result<()> {
        if let Some(f) = frames.iter().find(|f| f.embedding.0.len() != self.dim) {
            return Err(Error::InvalidConfig(format!(
                "provider dimension is {}, stored embedding has {}",
                self.dim,
                f.embedding.0.len()
            )));
        }
        self.probes.insert(probe_index, frames);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_probe(&self, probe: &ProbeWindow) -> Result<Vec<AudioFrame>> {
        self.probes
            .get(&probe.index)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("precomputed frames for probe {}", probe.index)))
    }
}

/// Layout: `frames: u32`, `dim: u32`, then `frames*dim` embedding f32s and
/// `frames*521` score f32s, all little-endian.
pub fn encode_precomputed(frames: &[AudioFrame]) -> Result<Vec<u8>> {
    let dim = frames.first().map_or(0, |f| f.embedding.0.len());
    let mut out = Vec::with_capacity(8 + frames.len() * (dim + NUM_CLASSES) * 4);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for f in frames {
        if f.embedding.0.len() != dim {
            return Err(Error::shape(format!("{dim}-d embeddings"), format!("{}", f.embedding.0.len())));
        }
        for &v in &f.embedding.0 {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for f in frames {
        for &v in f.scores.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_precomputed(bytes: &[u8]) -> Result<Vec<AudioFrame>> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Format("truncated embedding header".into()))
    };
    let n = word(0)? as usize;
    let dim = word(1)? as usize;
    let expected = 8 + n * (dim + NUM_CLASSES) * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {n} frames of dim {dim}, got {}",
            bytes.len()
        )));
    }
    let floats: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let (emb, scores) = floats.split_at(n * dim);
    (0..n)
        .map(|i| {
            Ok(AudioFrame {
                embedding: FrameEmbedding(emb[i * dim..(i + 1) * dim].to_vec()),
                scores: FrameScores::new(scores[i * NUM_CLASSES..(i + 1) * NUM_CLASSES].to_vec())?,
            })
        })
        .collect()
}
