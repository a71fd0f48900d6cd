use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fft_in_place, Matrix};
use crate::{math, Error, Result};

/// Audio front-end geometry. Defaults: 16 kHz, 25 ms Hann window, 10 ms hop,
/// 512-point FFT, 64 HTK-mel bands over 125–7500 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub win_samples: usize,
    pub hop_samples: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_eps: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            win_samples: 400,
            hop_samples: 160,
            n_fft: 512,
            n_mels: 64,
            fmin_hz: 125.0,
            fmax_hz: 7_500.0,
            log_eps: 1e-6,
        }
    }
}

impl LogMelConfig {
    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.win_samples {
            0
        } else {
            (n_samples - self.win_samples) / self.hop_samples + 1
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

/// `frames[t][m]` is the log mel energy of band `m` in frame `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMelSpectrogram {
    pub frames: Vec<Vec<f64>>,
    pub config: LogMelConfig,
}

impl LogMelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Bands × frames, frequency on rows like the sensor spectrograms.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_rows(&self.frames).transpose()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * math::ln(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (math::exp(mel / 1127.0) - 1.0)
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * math::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Triangular filters in mel space, `weights[m][k]` for FFT bin `k`.
pub fn mel_filterbank(cfg: &LogMelConfig) -> Vec<Vec<f64>> {
    let n_bins = cfg.n_bins();
    let lo = hz_to_mel(cfg.fmin_hz);
    let hi = hz_to_mel(cfg.fmax_hz);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64)
        .collect();
    let bin_mel: Vec<f64> = (0..n_bins)
        .map(|k| hz_to_mel(k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64))
        .collect();
    (0..cfg.n_mels)
        .map(|m| {
            let (l, c, u) = (edges[m], edges[m + 1], edges[m + 2]);
            bin_mel
                .iter()
                .enumerate()
                .map(|(k, &mel)| {
                    if k == 0 {
                        return 0.0;
                    }
                    let rise = (mel - l) / (c - l);
                    let fall = (u - mel) / (u - c);
                    rise.min(fall).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// One-sided STFT (`n_fft/2 + 1` bins per frame) of Hann-windowed frames.
pub fn stft(audio: &[f64], cfg: &LogMelConfig) -> Result<Vec<Vec<Complex64>>> {
    if audio.len() < cfg.win_samples {
        return Err(Error::InsufficientSamples { needed: cfg.win_samples, got: audio.len() });
    }
    if cfg.n_fft < cfg.win_samples || !cfg.n_fft.is_power_of_two() {
        return Err(Error::InvalidConfig("n_fft must be a power of two >= window".into()));
    }
    let window = hann_window(cfg.win_samples);
    let n_frames = cfg.n_frames(audio.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let frame = &audio[f * cfg.hop_samples..f * cfg.hop_samples + cfg.win_samples];
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (b, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            b.re = x * w;
        }
        fft_in_place(&mut buf);
        out.push(buf[..cfg.n_bins()].to_vec());
    }
    Ok(out)
}

/// Magnitude STFT → mel filterbank → `ln(x + eps)`.
pub fn log_mel(audio: &[f64], cfg: &LogMelConfig) -> Result<LogMelSpectrogram> {
    let spec = stft(audio, cfg)?;
    let bank = mel_filterbank(cfg);
    let frames = spec
        .iter()
        .map(|bins| {
            let mags: Vec<f64> = bins.iter().map(|c| c.norm()).collect();
            bank.iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(&mags).map(|(a, b)| a * b).sum();
                    math::ln(e + cfg.log_eps)
                })
                .collect()
        })
        .collect();
    Ok(LogMelSpectrogram { frames, config: *cfg })
}
