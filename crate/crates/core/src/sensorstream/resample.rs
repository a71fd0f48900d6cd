use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SensorSample;
use crate::{math, Error, Millis, Result};

/// A probe window resampled onto a uniform grid. `rows[k]` holds the values
/// for time bin `[k/rate, (k+1)/rate)` relative to the window start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRateSeries {
    pub rate_hz: f64,
    pub rows: Vec<Vec<f64>>,
}

impl FixedRateSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

/// Resamples one probe's samples to `target_hz`.
///
/// Surplus samples are averaged within half-open bins; empty bins are
/// linearly interpolated between the nearest populated bins, and leading or
/// trailing empty bins take the nearest populated value. Samples outside the
/// window are ignored.
pub fn normalize_rate(
    samples: &[SensorSample],
    window_start: Millis,
    window_ms: Millis,
    target_hz: f64,
) -> Result<FixedRateSeries> {
    if !(target_hz > 0.0) || !target_hz.is_finite() {
        return Err(Error::InvalidConfig("target rate must be positive".into()));
    }
    let n = math::round(window_ms as f64 / 1_000.0 * target_hz) as usize;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "window too short for target rate".into(),
        ));
    }
    let width = samples.first().map(|s| s.values.len()).unwrap_or(0);
    let mut sums = vec![vec![0.0; width]; n];
    let mut counts = vec![0usize; n];
    for s in samples {
        if s.values.len() != width {
            return Err(Error::shape(
                alloc::format!("{width} values per sample"),
                alloc::format!("{}", s.values.len()),
            ));
        }
        if s.t_ms < window_start {
            continue;
        }
        // Integer arithmetic keeps bin edges exact: bin = floor(dt * f / 1000).
        let dt = (s.t_ms - window_start) as f64;
        let bin = math::floor(dt * target_hz / 1_000.0 + 1e-9) as usize;
        if bin >= n {
            continue;
        }
        counts[bin] += 1;
        for (acc, v) in sums[bin].iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let filled: Vec<usize> = (0..n).filter(|&k| counts[k] > 0).collect();
    if filled.is_empty() {
        return Err(Error::MissingModality("any".into()));
    }
    let mut rows: Vec<Option<Vec<f64>>> = (0..n)
        .map(|k| {
            (counts[k] > 0).then(|| sums[k].iter().map(|v| v / counts[k] as f64).collect())
        })
        .collect();

    let first = filled[0];
    let last = *filled.last().unwrap();
    for k in 0..first {
        rows[k] = rows[first].clone();
    }
    for k in last + 1..n {
        rows[k] = rows[last].clone();
    }
    for pair in filled.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let va = rows[a].clone().unwrap();
        let vb = rows[b].clone().unwrap();
        for k in a + 1..b {
            let w = (k - a) as f64 / (b - a) as f64;
            rows[k] = Some(va.iter().zip(&vb).map(|(x, y)| x + (y - x) * w).collect());
        }
    }
    Ok(FixedRateSeries {
        rate_hz: target_hz,
        rows: rows.into_iter().map(Option::unwrap).collect(),
    })
}

/// Euclidean norm of each 3-axis row.
pub fn magnitude(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|r| {
            if r.len() != 3 {
                return Err(Error::shape("3 axes", alloc::format!("{}", r.len())));
            }
            Ok(math::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(t_ms: Millis, v: f64) -> SensorSample {
        SensorSample::new(t_ms, vec![v])
    }

    #[test]
    fn oversampled_accel_resamples_to_90() {
        // 299 samples over 15 s, roughly 19.9 Hz
        let samples: Vec<_> = (0..299)
            .map(|i| SensorSample::new(i * 15_000 / 299, vec![0.1, 0.2, 9.8]))
            .collect();
        let out = normalize_rate(&samples, 0, 15_000, 6.0).unwrap();
        assert_eq!(out.len(), 90);
        assert_eq!(out.channels(), 3);
    }

    #[test]
    fn constant_series_is_preserved() {
        let samples: Vec<_> = (0..40).map(|i| scalar(i * 370, 7.0)).collect();
        let out = normalize_rate(&samples, 0, 15_000, 6.0).unwrap();
        assert_eq!(out.len(), 90);
        assert!(out.rows.iter().all(|r| r[0] == 7.0));
    }

    #[test]
    fn ramp_midpoints_are_interpolated() {
        let samples: Vec<_> = (0..15).map(|i| scalar(i * 1_000, i as f64)).collect();
        let out = normalize_rate(&samples, 0, 15_000, 2.0).unwrap();
        assert_eq!(out.len(), 30);
        for k in 0..14 {
            assert_eq!(out.rows[2 * k][0], k as f64);
            assert_eq!(out.rows[2 * k + 1][0], k as f64 + 0.5);
        }
        // trailing empty bin clamps
        assert_eq!(out.rows[29][0], 14.0);
    }

    #[test]
    fn empty_input_is_missing_modality() {
        assert!(matches!(
            normalize_rate(&[], 0, 15_000, 6.0),
            Err(Error::MissingModality(_))
        ));
    }

    #[test]
    fn window_offset_is_respected() {
        let samples = vec![scalar(100_000, 1.0), scalar(114_999, 3.0)];
        let out = normalize_rate(&samples, 100_000, 15_000, 1.0).unwrap();
        assert_eq!(out.rows[0][0], 1.0);
        assert_eq!(out.rows[14][0], 3.0);
        assert!((out.rows[7][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn magnitude_examples() {
        let m = magnitude(&[vec![3.0, 4.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(m, vec![5.0, 0.0]);
        assert!(magnitude(&[vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn output_length_is_fixed(
            times in proptest::collection::vec(0u64..15_000, 1..400),
            rate in prop_oneof![Just(5.0), Just(6.0), Just(25.0), Just(2.0)],
        ) {
            let mut times = times;
            times.sort_unstable();
            let samples: Vec<_> = times.iter().map(|&t| scalar(t, t as f64)).collect();
            let out = normalize_rate(&samples, 0, 15_000, rate).unwrap();
            prop_assert_eq!(out.len(), (15.0 * rate) as usize);
        }

        #[test]
        fn monotone_input_gives_monotone_output(
            times in proptest::collection::vec(0u64..15_000, 1..200),
        ) {
            let mut times = times;
            times.sort_unstable();
            let samples: Vec<_> = times.iter().map(|&t| scalar(t, (t as f64).sqrt())).collect();
            let out = normalize_rate(&samples, 0, 15_000, 6.0).unwrap();
            for w in out.rows.windows(2) {
                prop_assert!(w[0][0] <= w[1][0] + 1e-12);
            }
        }

        #[test]
        fn magnitude_matches_formula(x in -1e3f64..1e3, y in -1e3f64..1e3, z in -1e3f64..1e3) {
            let m = magnitude(&[vec![x, y, z]]).unwrap()[0];
            let oracle = (x * x + y * y + z * z).sqrt();
            prop_assert!((m - oracle).abs() <= 1e-12 * oracle.max(1e-300));
        }
    }
}
