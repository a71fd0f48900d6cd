//! Seeded synthetic scenarios for replay.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{schedule_probes, DutyCycleConfig, ProbeWindow, SensorKind, SensorSample, SensorStreams};
use crate::audiofrontend::Vocabulary;
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::{math, Error, Millis, Result};

/// Half-open time interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start_ms: Millis,
    pub end_ms: Millis,
}

impl Interval {
    pub fn new(start_ms: Millis, end_ms: Millis) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn contains(&self, t: Millis) -> bool {
        t >= self.start_ms && t < self.end_ms
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionMode {
    InPerson,
    Virtual,
    Hybrid,
    #[default]
    Unknown,
}

fn default_cue_class() -> String {
    "Speech".into()
}

/// A ground-truth interaction. Per probe, `round(cue_rate * slots)` seconds
/// carry `cue_class`; `round(fg_rate * slots)` of those are the wearer's own
/// speech.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedInteraction {
    pub start_ms: Millis,
    pub end_ms: Millis,
    #[serde(default)]
    pub mode: InteractionMode,
    pub cue_rate: f64,
    pub fg_rate: f64,
    #[serde(default = "default_cue_class")]
    pub cue_class: String,
}

/// Background sound without the wearer speaking, e.g. a television.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientPeriod {
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub class: String,
    pub rate: f64,
}

/// Nominal per-kind sampling rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRates {
    pub accel_hz: f64,
    pub gravity_hz: f64,
    pub light_hz: f64,
    pub ppg_hz: f64,
}

impl Default for SampleRates {
    fn default() -> Self {
        Self {
            accel_hz: 6.25,
            gravity_hz: 6.25,
            light_hz: 5.0,
            ppg_hz: 25.0,
        }
    }
}

/// Emulates inconsistent delivery rates: a fraction of probes deliver motion
/// samples at `inflated_hz` instead of the nominal rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateJitter {
    pub inflated_fraction: f64,
    pub inflated_hz: f64,
}

impl Default for RateJitter {
    fn default() -> Self {
        Self {
            inflated_fraction: 0.0,
            inflated_hz: 19.9375,
        }
    }
}

fn default_bpm() -> f64 {
    72.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    #[serde(default)]
    pub epoch_ms: Millis,
    pub duration_ms: Millis,
    #[serde(default)]
    pub duty_cycle: DutyCycleConfig,
    #[serde(default)]
    pub interactions: Vec<PlantedInteraction>,
    #[serde(default)]
    pub ambient: Vec<AmbientPeriod>,
    #[serde(default)]
    pub off_body: Vec<Interval>,
    #[serde(default)]
    pub rates: SampleRates,
    #[serde(default)]
    pub jitter: RateJitter,
    #[serde(default = "default_bpm")]
    pub ppg_bpm: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticScenario {
    pub fn new(duration_ms: Millis, seed: u64) -> Self {
        Self {
            epoch_ms: 0,
            duration_ms,
            duty_cycle: DutyCycleConfig::default(),
            interactions: Vec::new(),
            ambient: Vec::new(),
            off_body: Vec::new(),
            rates: SampleRates::default(),
            jitter: RateJitter::default(),
            ppg_bpm: default_bpm(),
            seed,
        }
    }

    fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        self.duty_cycle.validate()?;
        let mut spans: Vec<(Interval, &str)> = Vec::new();
        for p in &self.interactions {
            if p.end_ms <= p.start_ms {
                return Err(Error::InvalidSpec(format!(
                    "interaction [{}, {}) is empty",
                    p.start_ms, p.end_ms
                )));
            }
            for (name, r) in [("cue_rate", p.cue_rate), ("fg_rate", p.fg_rate)] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidSpec(format!("{name} {r} outside [0, 1]")));
                }
            }
            if vocab.index_of(&p.cue_class).is_none() {
                return Err(Error::InvalidSpec(format!("unknown class `{}`", p.cue_class)));
            }
            spans.push((Interval::new(p.start_ms, p.end_ms), "interaction"));
        }
        for a in &self.ambient {
            if a.end_ms <= a.start_ms || !(0.0..=1.0).contains(&a.rate) {
                return Err(Error::InvalidSpec(format!(
                    "ambient period [{}, {}) is malformed",
                    a.start_ms, a.end_ms
                )));
            }
            if vocab.index_of(&a.class).is_none() {
                return Err(Error::InvalidSpec(format!("unknown class `{}`", a.class)));
            }
            spans.push((Interval::new(a.start_ms, a.end_ms), "ambient period"));
        }
        spans.sort_by_key(|(iv, _)| *iv);
        for w in spans.windows(2) {
            if w[0].0.overlaps(&w[1].0) {
                return Err(Error::InvalidSpec(format!(
                    "{} [{}, {}) overlaps {} [{}, {})",
                    w[0].1, w[0].0.start_ms, w[0].0.end_ms, w[1].1, w[1].0.start_ms, w[1].0.end_ms
                )));
            }
        }
        for r in [self.rates.accel_hz, self.rates.gravity_hz, self.rates.light_hz, self.rates.ppg_hz] {
            if !(r > 0.0) {
                return Err(Error::InvalidSpec("sampling rates must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Ground truth for one recorded second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTruth {
    pub t_ms: Millis,
    pub class_index: usize,
    pub cue: bool,
    pub foreground: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub probes: Vec<ProbeWindow>,
    pub streams: SensorStreams,
    pub slots: Vec<SlotTruth>,
}

/// Deterministically renders a scenario. Samples exist only inside probe
/// windows that do not intersect an off-body interval.
pub fn generate_scenario(spec: &SyntheticScenario, vocab: &Vocabulary) -> Result<GeneratedScenario> {
    spec.validate(vocab)?;
    let cues = crate::audiofrontend::CueVocabulary::new(vocab)?;
    let probes = schedule_probes(spec.epoch_ms, spec.duration_ms, &spec.duty_cycle)?;
    let n_slots = spec.duty_cycle.slots_per_window();

    let silence = vocab.index_of("Silence").unwrap_or(NON_CUE_FALLBACK);
    let room = vocab.index_of("Inside, small room").unwrap_or(silence);

    let mut slot_rng = seeded(derive_seed(spec.seed, 1));
    let mut motion_rng = seeded(derive_seed(spec.seed, 2));
    let mut light_rng = seeded(derive_seed(spec.seed, 3));
    let mut ppg_rng = seeded(derive_seed(spec.seed, 4));
    let mut jitter_rng = seeded(derive_seed(spec.seed, 5));
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut streams = SensorStreams::new();
    let mut slots = Vec::new();
    for probe in &probes {
        let window = Interval::new(probe.start, probe.end);
        let inflated = jitter_rng.random::<f64>() < spec.jitter.inflated_fraction;
        if spec.off_body.iter().any(|o| o.overlaps(&window)) {
            continue;
        }
        // Per-second audio descriptors.
        let mut classes = vec![silence; n_slots];
        let mut fg = vec![false; n_slots];
        let slot_times: Vec<Millis> = (0..n_slots).map(|i| probe.start + i as u64 * 1_000).collect();
        let mut active = false;
        for p in &spec.interactions {
            let span = Interval::new(p.start_ms, p.end_ms);
            let idx: Vec<usize> = (0..n_slots).filter(|&i| span.contains(slot_times[i])).collect();
            if idx.is_empty() {
                continue;
            }
            active = true;
            let class = vocab.index_of(&p.cue_class).unwrap();
            let n_cue = math::round(p.cue_rate * idx.len() as f64) as usize;
            let n_fg = (math::round(p.fg_rate * idx.len() as f64) as usize).min(n_cue);
            let mut order = idx;
            order.shuffle(&mut slot_rng);
            for (rank, &i) in order.iter().enumerate() {
                classes[i] = if rank < n_cue { class } else { room };
                fg[i] = rank < n_fg;
            }
        }
        for a in &spec.ambient {
            let span = Interval::new(a.start_ms, a.end_ms);
            let idx: Vec<usize> = (0..n_slots).filter(|&i| span.contains(slot_times[i])).collect();
            if idx.is_empty() {
                continue;
            }
            let class = vocab.index_of(&a.class).unwrap();
            let n = math::round(a.rate * idx.len() as f64) as usize;
            let mut order = idx;
            order.shuffle(&mut slot_rng);
            for &i in &order[..n] {
                classes[i] = class;
            }
        }
        for i in 0..n_slots {
            let cue = cues.contains(classes[i]);
            // the wearer only "speaks" in cue seconds
            let foreground = fg[i] && cue;
            slots.push(SlotTruth { t_ms: slot_times[i], class_index: classes[i], cue, foreground });
            streams.push(
                SensorKind::AudioFeature,
                SensorSample::new(slot_times[i], vec![classes[i] as f64, foreground as u8 as f64]),
            );
        }

        let motion_hz = if inflated { spec.jitter.inflated_hz } else { spec.rates.accel_hz };
        let gravity_hz = if inflated { spec.jitter.inflated_hz } else { spec.rates.gravity_hz };
        emit_motion(&mut streams, probe, motion_hz, gravity_hz, active, &mut motion_rng, &noise);
        emit_light(&mut streams, probe, spec.rates.light_hz, active, &mut light_rng, &noise);
        emit_ppg(&mut streams, probe, spec.rates.ppg_hz, spec.ppg_bpm, active, &mut ppg_rng, &noise);
    }
    Ok(GeneratedScenario { probes, streams, slots })
}

const NON_CUE_FALLBACK: usize = 520;

fn sample_times(probe: &ProbeWindow, hz: f64) -> impl Iterator<Item = Millis> + '_ {
    let step = 1_000.0 / hz;
    (0..)
        .map(move |j| probe.start + math::floor(j as f64 * step) as u64)
        .take_while(move |&t| t < probe.end)
}

fn emit_motion(
    streams: &mut SensorStreams,
    probe: &ProbeWindow,
    accel_hz: f64,
    gravity_hz: f64,
    active: bool,
    rng: &mut SeededRng,
    noise: &Normal<f64>,
) {
    let tilt = rng.random_range(0.0..0.6);
    // gesturing while talking
    let gesture = if active { 1.2 } else { 0.15 };
    let phase = rng.random_range(0.0..2.0 * PI);
    for t in sample_times(probe, accel_hz) {
        let s = (t - probe.start) as f64 / 1_000.0;
        let g = (math::sin(2.0 * PI * 1.5 * s + phase)) * gesture;
        let v = vec![
            g + 0.05 * noise.sample(rng),
            9.81 * math::sin(tilt) + 0.05 * noise.sample(rng),
            9.81 * math::cos(tilt) + 0.05 * noise.sample(rng),
        ];
        streams.push(SensorKind::Accel, SensorSample::new(t, v));
    }
    for t in sample_times(probe, gravity_hz) {
        let v = vec![
            0.02 * noise.sample(rng),
            9.81 * math::sin(tilt),
            9.81 * math::cos(tilt),
        ];
        streams.push(SensorKind::Gravity, SensorSample::new(t, v));
    }
}

fn emit_light(
    streams: &mut SensorStreams,
    probe: &ProbeWindow,
    hz: f64,
    active: bool,
    rng: &mut SeededRng,
    noise: &Normal<f64>,
) {
    let base = if active { 450.0 } else { 250.0 } + rng.random_range(-50.0..50.0);
    for t in sample_times(probe, hz) {
        let lux = (base + 10.0 * noise.sample(rng)).max(0.0);
        streams.push(SensorKind::Light, SensorSample::new(t, vec![lux]));
    }
}

fn emit_ppg(
    streams: &mut SensorStreams,
    probe: &ProbeWindow,
    hz: f64,
    bpm: f64,
    active: bool,
    rng: &mut SeededRng,
    noise: &Normal<f64>,
) {
    let beat_hz = (bpm + if active { 8.0 } else { 0.0 }) / 60.0;
    let phase = rng.random_range(0.0..2.0 * PI);
    let drift = rng.random_range(-20.0..20.0);
    for t in sample_times(probe, hz) {
        let s = t as f64 / 1_000.0;
        let w = 2.0 * PI * beat_hz * s + phase;
        let v = 100.0 * math::sin(w) + 35.0 * math::sin(2.0 * w + 0.8)
            + drift * ((t - probe.start) as f64 / 15_000.0)
            + 3.0 * noise.sample(rng);
        streams.push(SensorKind::Ppg, SensorSample::new(t, vec![v]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{HOUR_MS, MINUTE_MS};

    fn vocab() -> Vocabulary {
        Vocabulary::builtin()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut spec = SyntheticScenario::new(2 * HOUR_MS, 42);
        spec.interactions.push(PlantedInteraction {
            start_ms: 10 * MINUTE_MS,
            end_ms: 20 * MINUTE_MS,
            mode: InteractionMode::InPerson,
            cue_rate: 0.7,
            fg_rate: 0.3,
            cue_class: "Speech".into(),
        });
        spec.jitter.inflated_fraction = 0.3;
        let a = generate_scenario(&spec, &vocab()).unwrap();
        let b = generate_scenario(&spec, &vocab()).unwrap();
        assert_eq!(a, b);
        a.streams.validate().unwrap();
    }

    #[test]
    fn full_cue_interaction_flags_every_covered_slot() {
        let mut spec = SyntheticScenario::new(12 * HOUR_MS, 7);
        spec.interactions.push(PlantedInteraction {
            start_ms: 10 * HOUR_MS,
            end_ms: 10 * HOUR_MS + 5 * MINUTE_MS,
            mode: InteractionMode::InPerson,
            cue_rate: 1.0,
            fg_rate: 0.3,
            cue_class: "Conversation".into(),
        });
        let g = generate_scenario(&spec, &vocab()).unwrap();
        let covered: Vec<_> = g
            .slots
            .iter()
            .filter(|s| s.t_ms >= 10 * HOUR_MS && s.t_ms < 10 * HOUR_MS + 5 * MINUTE_MS)
            .collect();
        assert_eq!(covered.len(), 4 * 15);
        assert!(covered.iter().all(|s| s.cue));
        assert!(g.slots.iter().filter(|s| s.cue).count() == 60);
    }

    #[test]
    fn off_body_removes_all_samples() {
        let mut spec = SyntheticScenario::new(12 * HOUR_MS, 7);
        let off = Interval::new(11 * HOUR_MS, 11 * HOUR_MS + 30 * MINUTE_MS);
        spec.off_body.push(off);
        let g = generate_scenario(&spec, &vocab()).unwrap();
        let hit: Vec<_> = g
            .probes
            .iter()
            .filter(|p| Interval::new(p.start, p.end).overlaps(&off))
            .collect();
        assert!(!hit.is_empty());
        for p in hit {
            assert!(g.streams.fill_probe(p).is_empty());
        }
        assert!(!g.streams.fill_probe(&g.probes[0]).is_empty());
    }

    #[test]
    fn overlapping_interactions_are_rejected() {
        let mut spec = SyntheticScenario::new(HOUR_MS, 1);
        for start in [0, 5 * MINUTE_MS] {
            spec.interactions.push(PlantedInteraction {
                start_ms: start,
                end_ms: start + 10 * MINUTE_MS,
                mode: InteractionMode::Virtual,
                cue_rate: 1.0,
                fg_rate: 0.5,
                cue_class: "Speech".into(),
            });
        }
        assert!(matches!(generate_scenario(&spec, &vocab()), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn inflated_rate_probes_carry_more_samples() {
        let mut spec = SyntheticScenario::new(HOUR_MS, 3);
        spec.jitter.inflated_fraction = 1.0;
        let g = generate_scenario(&spec, &vocab()).unwrap();
        let p = g.streams.fill_probe(&g.probes[0]);
        assert_eq!(p.samples_of(SensorKind::Accel).len(), 300);
        assert_eq!(p.samples_of(SensorKind::Ppg).len(), 375);
        assert_eq!(p.samples_of(SensorKind::AudioFeature).len(), 15);
    }
}
