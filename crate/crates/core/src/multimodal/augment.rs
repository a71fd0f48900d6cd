use alloc::format;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{resize_bilinear, Matrix, SpectrogramImage, IMAGE_SIZE};
use crate::rng::SeededRng;
use crate::{math, Error, Result};

/// Training-time image augmentation. Every transform acts along the time
/// axis (columns) only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub flip_probability: f64,
    /// Stretch factor range; `None` disables stretching.
    pub stretch: Option<(f64, f64)>,
    /// Additive Gaussian noise sd; 0 disables noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { flip_probability: 0.5, stretch: Some((1.001, 1.05)), noise_sd: 0.05, seed: 0 }
    }
}

impl AugmentationConfig {
    /// Leaves every image untouched.
    pub fn disabled() -> Self {
        Self { flip_probability: 0.0, stretch: None, noise_sd: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidConfig(format!("flip probability {} outside [0, 1]", self.flip_probability)));
        }
        if let Some((lo, hi)) = self.stretch {
            if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!("stretch range [{lo}, {hi}] must satisfy 1 <= lo <= hi")));
            }
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise sd {} must be finite and >= 0", self.noise_sd)));
        }
        Ok(())
    }
}

/// Reverses the column (time) order.
pub fn flip_time(image: &SpectrogramImage) -> SpectrogramImage {
    let m = &image.pixels;
    let mut out = Matrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        for c in 0..m.cols {
            out.set(r, c, m.get(r, m.cols - 1 - c));
        }
    }
    SpectrogramImage { pixels: out }
}

/// Random flip, then stretch along time by a factor drawn from the
/// configured range with a random crop back to the original width, then
/// additive noise. Values are not clipped, so noise stays zero-mean.
pub fn augment(image: &SpectrogramImage, cfg: &AugmentationConfig, rng: &mut SeededRng) -> Result<SpectrogramImage> {
    let (rows, cols) = (image.pixels.rows, image.pixels.cols);
    if rows != IMAGE_SIZE || cols != IMAGE_SIZE || image.pixels.data.len() != rows * cols {
        return Err(Error::shape(format!("{IMAGE_SIZE}x{IMAGE_SIZE}"), format!("{rows}x{cols}")));
    }
    cfg.validate()?;
    let mut out = if cfg.flip_probability > 0.0 && rng.random::<f64>() < cfg.flip_probability {
        flip_time(image).pixels
    } else {
        image.pixels.clone()
    };
    if let Some((lo, hi)) = cfg.stretch {
        let scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let wide = (math::round(cols as f64 * scale) as usize).max(cols);
        if wide > cols {
            let stretched = resize_bilinear(&out, rows, wide)?;
            let offset = rng.random_range(0..=wide - cols);
            for r in 0..rows {
                for c in 0..cols {
                    out.set(r, c, stretched.get(r, c + offset));
                }
            }
        }
    }
    if cfg.noise_sd > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
        out.data.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(SpectrogramImage { pixels: out })
}
