use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::{math, Error, Result};

pub const IMAGE_SIZE: usize = 112;

/// A 112×112 spectrogram image with values in `[0, 1]`; rows are frequency,
/// columns are time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramImage {
    pub pixels: Matrix,
}

impl SpectrogramImage {
    pub fn new(pixels: Matrix) -> Result<Self> {
        if pixels.rows != IMAGE_SIZE || pixels.cols != IMAGE_SIZE {
            return Err(Error::shape(
                alloc::format!("{IMAGE_SIZE}x{IMAGE_SIZE}"),
                alloc::format!("{}x{}", pixels.rows, pixels.cols),
            ));
        }
        Ok(Self { pixels })
    }
}

/// Bilinear resize with half-pixel centers; source coordinates are clamped
/// to the input grid.
pub fn resize_bilinear(m: &Matrix, out_rows: usize, out_cols: usize) -> Result<Matrix> {
    if m.is_empty() || out_rows == 0 || out_cols == 0 {
        return Err(Error::shape("non-empty matrix", alloc::format!("{}x{}", m.rows, m.cols)));
    }
    let axis = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let scale = n_in as f64 / n_out as f64;
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = math::floor(src) as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, src - i0 as f64)
    };
    let mut out = Matrix::zeros(out_rows, out_cols);
    for r in 0..out_rows {
        let (r0, r1, fr) = axis(r, m.rows, out_rows);
        for c in 0..out_cols {
            let (c0, c1, fc) = axis(c, m.cols, out_cols);
            let top = m.get(r0, c0) * (1.0 - fc) + m.get(r0, c1) * fc;
            let bottom = m.get(r1, c0) * (1.0 - fc) + m.get(r1, c1) * fc;
            out.set(r, c, top * (1.0 - fr) + bottom * fr);
        }
    }
    Ok(out)
}

/// Resizes to 112×112, then min-max normalizes to `[0, 1]`. A constant input
/// yields an all-zero image.
pub fn to_image(m: &Matrix) -> Result<SpectrogramImage> {
    let mut px = resize_bilinear(m, IMAGE_SIZE, IMAGE_SIZE)?;
    let (lo, hi) = px
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let span = hi - lo;
        px.data.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        px.data.iter_mut().for_each(|v| *v = 0.0);
    }
    SpectrogramImage::new(px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn same_size_input_is_identity_resize() {
        let data: Vec<f64> = (0..IMAGE_SIZE * IMAGE_SIZE).map(|i| ((i * 37) % 101) as f64).collect();
        let m = Matrix { rows: IMAGE_SIZE, cols: IMAGE_SIZE, data };
        assert_eq!(resize_bilinear(&m, IMAGE_SIZE, IMAGE_SIZE).unwrap(), m);
        let img = to_image(&m).unwrap();
        let lo = img.pixels.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.pixels.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn constant_matrix_gives_zero_image() {
        let m = Matrix { rows: 9, cols: 19, data: alloc::vec![4.2; 171] };
        assert!(to_image(&m).unwrap().pixels.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_matrix_is_shape_error() {
        assert!(matches!(to_image(&Matrix::zeros(0, 5)), Err(Error::Shape { .. })));
    }

    // Independent bilinear formula written directly from continuous
    // coordinates.
    fn oracle(m: &Matrix, r: usize, c: usize) -> f64 {
        let y = ((r as f64 + 0.5) * m.rows as f64 / 112.0 - 0.5).max(0.0).min((m.rows - 1) as f64);
        let x = ((c as f64 + 0.5) * m.cols as f64 / 112.0 - 0.5).max(0.0).min((m.cols - 1) as f64);
        let mut acc = 0.0;
        for i in 0..m.rows {
            for j in 0..m.cols {
                let wy = (1.0 - (y - i as f64).abs()).max(0.0);
                let wx = (1.0 - (x - j as f64).abs()).max(0.0);
                acc += wy * wx * m.get(i, j);
            }
        }
        acc
    }

    #[test]
    fn upsampled_values_match_bilinear_oracle() {
        let data: Vec<f64> = (0..9 * 19).map(|i| libm::sin(i as f64 * 0.7) * 3.0).collect();
        let m = Matrix { rows: 9, cols: 19, data };
        let out = resize_bilinear(&m, 112, 112).unwrap();
        for r in (0..112).step_by(7) {
            for c in (0..112).step_by(5) {
                assert!((out.get(r, c) - oracle(&m, r, c)).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn image_is_always_112_and_bounded(
            rows in 1usize..40, cols in 1usize..80, seed in 0u64..1000,
        ) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| libm::sin((i as u64 * 31 + seed) as f64) * 100.0)
                .collect();
            let img = to_image(&Matrix { rows, cols, data }).unwrap();
            prop_assert_eq!((img.pixels.rows, img.pixels.cols), (112, 112));
            prop_assert!(img.pixels.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
