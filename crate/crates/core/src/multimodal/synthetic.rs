use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Modality, MultimodalSample};
use crate::dsp::{Matrix, SpectrogramImage, IMAGE_SIZE};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Planted-separation dataset: each modality has its own frequency band
/// whose energy is high for interactions and low otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFusionSpec {
    pub participants: usize,
    pub samples_per_participant: usize,
    pub modalities: Vec<Modality>,
    /// Band level for interactions and for non-interactions.
    pub band_levels: (f64, f64),
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticFusionSpec {
    fn default() -> Self {
        Self {
            participants: 6,
            samples_per_participant: 40,
            modalities: alloc::vec![Modality::Accel, Modality::Audio],
            band_levels: (0.7, 0.35),
            noise_sd: 0.08,
            seed: 0,
        }
    }
}

const BACKGROUND: f64 = 0.2;
const BAND_HALF_WIDTH: usize = 8;
const BAND_JITTER: i64 = 6;

fn band_center(modality_index: usize) -> usize {
    20 + (modality_index * 27) % (IMAGE_SIZE - 40)
}

/// Participants are `P01`, `P02`, ...; each gets its own positive share in
/// `[0.25, 0.75]` so class balance differs between them.
pub fn synthetic_fusion_dataset(spec: &SyntheticFusionSpec) -> Result<Vec<MultimodalSample>> {
    if spec.participants == 0 || spec.samples_per_participant == 0 || spec.modalities.is_empty() {
        return Err(Error::InvalidConfig("synthetic dataset needs participants, samples, and modalities".into()));
    }
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let mut rng = seeded(derive_seed(spec.seed, 0x5A17));
    let mut out = Vec::with_capacity(spec.participants * spec.samples_per_participant);
    let mut probe = 0u64;
    for p in 0..spec.participants {
        let participant = format!("P{:02}", p + 1);
        let share: f64 = rng.random_range(0.25..=0.75);
        for _ in 0..spec.samples_per_participant {
            let interaction = rng.random::<f64>() < share;
            let mut images = BTreeMap::new();
            for (mi, &m) in spec.modalities.iter().enumerate() {
                let center = band_center(mi) as i64 + rng.random_range(-BAND_JITTER..=BAND_JITTER);
                let level = if interaction { spec.band_levels.0 } else { spec.band_levels.1 };
                let gain: f64 = rng.random_range(-0.1..=0.1);
                let mut px = Matrix::zeros(IMAGE_SIZE, IMAGE_SIZE);
                for r in 0..IMAGE_SIZE {
                    let in_band = (r as i64 - center).unsigned_abs() as usize <= BAND_HALF_WIDTH;
                    let base = if in_band { level + gain } else { BACKGROUND };
                    for c in 0..IMAGE_SIZE {
                        px.set(r, c, (base + noise.sample(&mut rng)).clamp(0.0, 1.0));
                    }
                }
                images.insert(m, SpectrogramImage::new(px)?);
            }
            out.push(MultimodalSample { probe, participant: participant.clone(), interaction, images });
            probe += 1;
        }
    }
    Ok(out)
}
