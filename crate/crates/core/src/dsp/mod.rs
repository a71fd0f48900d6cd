//! Time–frequency features: audio log-mel spectrograms, short-window sensor
//! spectrograms, PPG cleaning, and fixed-size image formation.

mod fft;
mod image;
mod mel;
mod ppg;
mod sensor;
mod store;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use fft::{dft_naive, fft_in_place};
pub use image::{resize_bilinear, to_image, SpectrogramImage, IMAGE_SIZE};
pub use mel::{hann_window, hz_to_mel, log_mel, mel_filterbank, mel_to_hz, stft, LogMelConfig, LogMelSpectrogram};
pub use ppg::{ppg_clean, Biquad, PPG_BAND_HZ};
pub use sensor::{sensor_spectrogram, SENSOR_FFT_SIZE, SENSOR_HOP, SENSOR_OVERLAP, SENSOR_SEGMENT};
pub use store::{decode_spgm, encode_spgm, SPGM_MAGIC, SPGM_VERSION};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}
