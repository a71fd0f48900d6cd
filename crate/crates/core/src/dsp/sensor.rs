use alloc::vec;

use num_complex::Complex64;

use super::{fft_in_place, Matrix};
use crate::{Error, Result};

pub const SENSOR_SEGMENT: usize = 16;
pub const SENSOR_FFT_SIZE: usize = 16;
pub const SENSOR_OVERLAP: usize = 12;
pub const SENSOR_HOP: usize = SENSOR_SEGMENT - SENSOR_OVERLAP;

/// One-sided magnitude spectrogram of a fixed-rate scalar series with
/// rectangular 16-sample segments, hop 4. Shape: 9 frequency bins × frames.
pub fn sensor_spectrogram(series: &[f64]) -> Result<Matrix> {
    if series.len() < SENSOR_SEGMENT {
        return Err(Error::InsufficientSamples { needed: SENSOR_SEGMENT, got: series.len() });
    }
    let n_frames = (series.len() - SENSOR_SEGMENT) / SENSOR_HOP + 1;
    let n_bins = SENSOR_FFT_SIZE / 2 + 1;
    let mut out = Matrix::zeros(n_bins, n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); SENSOR_FFT_SIZE];
    for f in 0..n_frames {
        for (b, &x) in buf.iter_mut().zip(&series[f * SENSOR_HOP..f * SENSOR_HOP + SENSOR_SEGMENT]) {
            *b = Complex64::new(x, 0.0);
        }
        fft_in_place(&mut buf);
        for k in 0..n_bins {
            out.set(k, f, buf[k].norm());
        }
    }
    Ok(out)
}
