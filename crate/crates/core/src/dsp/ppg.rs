use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{math, Error, Result};

/// Pass band of the PPG cleaning filter.
pub const PPG_BAND_HZ: (f64, f64) = (0.5, 8.0);

/// Second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth (Q = 1/√2) sections via the bilinear transform with
    /// pre-warping.
    pub fn lowpass(cutoff_hz: f64, fs: f64) -> Self {
        let (cw, alpha) = Self::prewarp(cutoff_hz, fs);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn highpass(cutoff_hz: f64, fs: f64) -> Self {
        let (cw, alpha) = Self::prewarp(cutoff_hz, fs);
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    fn prewarp(cutoff_hz: f64, fs: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        (math::cos(w0), math::sin(w0) / core::f64::consts::SQRT_2)
    }

    /// Steady-state response to a unit step.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filters `x` starting from the steady state for a constant `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let g = self.dc_gain();
        let mut z1 = (g - self.b[0]) * x0;
        let mut z2 = (self.b[2] - self.a[1] * g) * x0;
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (v - x_mean);
        den += dt * dt;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, &v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}

/// Linear detrend followed by a zero-phase 0.5–8 Hz band-pass (second-order
/// high-pass and low-pass sections run forward then backward over an
/// odd-reflected signal). Output length equals input length.
pub fn ppg_clean(series: &[f64], fs: f64) -> Result<Vec<f64>> {
    if !(fs > 2.0 * PPG_BAND_HZ.1) {
        return Err(Error::InvalidConfig("sampling rate too low for PPG band".into()));
    }
    let needed = math::round(3.0 * fs) as usize;
    if series.len() < needed {
        return Err(Error::InsufficientSamples { needed, got: series.len() });
    }
    let x = detrend(series);
    let sections = [Biquad::highpass(PPG_BAND_HZ.0, fs), Biquad::lowpass(PPG_BAND_HZ.1, fs)];

    let n = x.len();
    let pad = (n - 1).min(math::round(3.0 * fs) as usize);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(&x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}
