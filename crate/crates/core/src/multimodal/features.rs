use alloc::collections::BTreeMap;
use alloc::string::ToString;

use serde::{Deserialize, Serialize};

use super::Modality;
use crate::dsp::{ppg_clean, sensor_spectrogram, to_image, SpectrogramImage};
use crate::sensorstream::{magnitude, normalize_rate, ProbeWindow, SensorKind};
use crate::{Error, Result};

/// Rates each sensor is normalized to before its spectrogram is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRates {
    pub accel_hz: f64,
    pub gravity_hz: f64,
    pub light_hz: f64,
    pub ppg_hz: f64,
}

impl Default for FeatureRates {
    fn default() -> Self {
        Self { accel_hz: 6.0, gravity_hz: 6.0, light_hz: 5.0, ppg_hz: 25.0 }
    }
}

/// Rate-normalized sensor spectrogram image for one modality of a probe.
/// Motion sensors use the per-sample vector magnitude; PPG is cleaned
/// first. Audio images are not derivable from probe streams (only
/// per-second descriptors are kept) and must come from a feature store.
pub fn sensor_image(probe: &ProbeWindow, modality: Modality, rates: &FeatureRates) -> Result<SpectrogramImage> {
    let (kind, hz) = match modality {
        Modality::Accel => (SensorKind::Accel, rates.accel_hz),
        Modality::Gravity => (SensorKind::Gravity, rates.gravity_hz),
        Modality::Light => (SensorKind::Light, rates.light_hz),
        Modality::Ppg => (SensorKind::Ppg, rates.ppg_hz),
        Modality::Audio => return Err(Error::MissingModality("audio images come from stored log-mel features".into())),
    };
    let samples = probe.samples_of(kind);
    if samples.is_empty() {
        return Err(Error::MissingModality(kind.name().to_string()));
    }
    let series = normalize_rate(samples, probe.start, probe.duration_ms(), hz)?;
    let scalar = match kind {
        SensorKind::Accel | SensorKind::Gravity => magnitude(&series.rows)?,
        SensorKind::Ppg => ppg_clean(&series.channel(0), hz)?,
        _ => series.channel(0),
    };
    to_image(&sensor_spectrogram(&scalar)?)
}

pub fn probe_images(
    probe: &ProbeWindow,
    modalities: &[Modality],
    rates: &FeatureRates,
) -> Result<BTreeMap<Modality, SpectrogramImage>> {
    modalities.iter().map(|&m| Ok((m, sensor_image(probe, m, rates)?))).collect()
}
