//! Sensor-stream data model, duty-cycle probe scheduling, per-probe rate
//! normalization, and synthetic scenario generation.

mod resample;
mod scenario;

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Millis, Result};

pub use resample::{magnitude, normalize_rate, FixedRateSeries};
pub use scenario::{
    generate_scenario, AmbientPeriod, GeneratedScenario, Interval, InteractionMode,
    PlantedInteraction, RateJitter, SampleRates, SlotTruth, SyntheticScenario,
};

/// Kinds of stream the device records during a probe.
///
/// `AudioFeature` carries derived per-second audio descriptors only; raw audio
/// is never part of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    AudioFeature,
    Ppg,
    Accel,
    Gravity,
    Light,
}

impl SensorKind {
    pub const ALL: [SensorKind; 5] = [
        SensorKind::AudioFeature,
        SensorKind::Ppg,
        SensorKind::Accel,
        SensorKind::Gravity,
        SensorKind::Light,
    ];

    /// Number of values every sample of this kind carries.
    pub fn arity(self) -> usize {
        match self {
            // [class index, foreground flag]
            SensorKind::AudioFeature => 2,
            SensorKind::Ppg | SensorKind::Light => 1,
            SensorKind::Accel | SensorKind::Gravity => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::AudioFeature => "audio-feature",
            SensorKind::Ppg => "ppg",
            SensorKind::Accel => "accel",
            SensorKind::Gravity => "gravity",
            SensorKind::Light => "light",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One timestamped reading. Units: accel/gravity m/s², light lux, ppg a.u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t_ms: Millis,
    pub values: Vec<f64>,
}

impl SensorSample {
    pub fn new(t_ms: Millis, values: Vec<f64>) -> Self {
        Self { t_ms, values }
    }

    pub fn check_arity(&self, kind: SensorKind) -> Result<()> {
        if self.values.len() != kind.arity() {
            return Err(Error::shape(
                alloc::format!("{} values for {}", kind.arity(), kind.name()),
                self.values.len().to_string(),
            ));
        }
        Ok(())
    }
}

/// Repeating record/idle schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DutyCycleConfig {
    pub window_ms: Millis,
    pub gap_ms: Millis,
}

impl Default for DutyCycleConfig {
    fn default() -> Self {
        Self {
            window_ms: 15_000,
            gap_ms: 75_000,
        }
    }
}

impl DutyCycleConfig {
    pub fn period_ms(&self) -> Millis {
        self.window_ms + self.gap_ms
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_ms == 0 || self.gap_ms == 0 {
            return Err(Error::InvalidConfig(
                "window and gap durations must be positive".into(),
            ));
        }
        if self.window_ms % 1_000 != 0 {
            return Err(Error::InvalidConfig(
                "window duration must be a whole number of seconds".into(),
            ));
        }
        Ok(())
    }

    /// Number of one-second slots per window.
    pub fn slots_per_window(&self) -> usize {
        (self.window_ms / 1_000) as usize
    }
}

/// One duty-cycle sensing interval and whatever was recorded inside it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeWindow {
    pub index: u64,
    pub start: Millis,
    pub end: Millis,
    pub samples: BTreeMap<SensorKind, Vec<SensorSample>>,
    pub on_body: bool,
}

impl ProbeWindow {
    pub fn duration_ms(&self) -> Millis {
        self.end - self.start
    }

    pub fn samples_of(&self, kind: SensorKind) -> &[SensorSample] {
        self.samples.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.samples.values().all(Vec::is_empty)
    }
}

/// Lays out probe shells `[epoch + i*period, epoch + i*period + window)` that
/// fit entirely inside `[epoch, epoch + horizon]`.
pub fn schedule_probes(
    epoch: Millis,
    horizon_ms: Millis,
    cfg: &DutyCycleConfig,
) -> Result<Vec<ProbeWindow>> {
    if horizon_ms == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    cfg.validate()?;
    let period = cfg.period_ms();
    let limit = epoch + horizon_ms;
    let mut probes = Vec::new();
    let mut index = 0u64;
    loop {
        let start = epoch + index * period;
        let end = start + cfg.window_ms;
        if end > limit {
            break;
        }
        probes.push(ProbeWindow {
            index,
            start,
            end,
            samples: BTreeMap::new(),
            on_body: true,
        });
        index += 1;
    }
    Ok(probes)
}

/// Per-kind sample streams, each sorted by timestamp.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorStreams {
    pub streams: BTreeMap<SensorKind, Vec<SensorSample>>,
}

impl SensorStreams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stream(&self, kind: SensorKind) -> &[SensorSample] {
        self.streams.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn push(&mut self, kind: SensorKind, sample: SensorSample) {
        self.streams.entry(kind).or_default().push(sample);
    }

    /// Checks arity and ordering of every stream.
    pub fn validate(&self) -> Result<()> {
        for (&kind, samples) in &self.streams {
            for s in samples {
                s.check_arity(kind)?;
            }
            if samples.windows(2).any(|w| w[0].t_ms > w[1].t_ms) {
                return Err(Error::InvalidData(alloc::format!(
                    "{} stream is not sorted by time",
                    kind.name()
                )));
            }
        }
        Ok(())
    }

    /// Copies the samples that fall in `[shell.start, shell.end)` into a
    /// filled probe. A probe with no samples at all is treated as off-body.
    pub fn fill_probe(&self, shell: &ProbeWindow) -> ProbeWindow {
        let mut samples = BTreeMap::new();
        for (&kind, stream) in &self.streams {
            let lo = stream.partition_point(|s| s.t_ms < shell.start);
            let hi = stream.partition_point(|s| s.t_ms < shell.end);
            if hi > lo {
                samples.insert(kind, stream[lo..hi].to_vec());
            }
        }
        let on_body = !samples.is_empty();
        ProbeWindow {
            index: shell.index,
            start: shell.start,
            end: shell.end,
            samples,
            on_body,
        }
    }

    /// Latest timestamp across all streams.
    pub fn last_timestamp(&self) -> Option<Millis> {
        self.streams
            .values()
            .filter_map(|s| s.last().map(|x| x.t_ms))
            .max()
    }
}
