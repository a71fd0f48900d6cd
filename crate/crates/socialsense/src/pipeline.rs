//! Scenario directories and the offline replay that feeds the gateway.
//!
//! A scenario directory holds `scenario.json` (the generator spec), a
//! `streams/` directory with one JSONL file per sensor kind, and optionally
//! `vocabulary.txt`. Probe windows are rebuilt from the duty cycle and
//! filled from the streams, so a probe without samples is off-body.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use socialsense_core::audiofrontend::{CueVocabulary, EmbeddingProvider, SyntheticProvider, Vocabulary};
use socialsense_core::detector::{run_replay, Confirmation, DetectorConfig, InteractionSegment, ReplayOutput};
use socialsense_core::fsd::{synthetic_dataset, FrameClassifierConfig, FsdInstance, FsdModel};
use socialsense_core::meta::MetaAlgorithm;
use socialsense_core::multimodal::{probe_images, FeatureRates, Modality};
use socialsense_core::rng::derive_seed;
use socialsense_core::sensorstream::{
    generate_scenario, schedule_probes, GeneratedScenario, Interval, ProbeWindow, SensorStreams, SyntheticScenario,
};
use socialsense_core::Millis;

use crate::error::Result;
use crate::io::{read_json, read_streams, read_vocabulary, write_json, write_streams};
use crate::store::FeatureStore;

pub const SCENARIO_FILE: &str = "scenario.json";
pub const STREAMS_DIR: &str = "streams";
pub const VOCABULARY_FILE: &str = "vocabulary.txt";

#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub spec: SyntheticScenario,
    pub streams: SensorStreams,
    pub vocab: Vocabulary,
}

impl ScenarioData {
    pub fn generate(spec: SyntheticScenario) -> Result<(Self, GeneratedScenario)> {
        let vocab = Vocabulary::builtin();
        let generated = generate_scenario(&spec, &vocab)?;
        Ok((Self { spec, streams: generated.streams.clone(), vocab }, generated))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec: SyntheticScenario = read_json(&dir.join(SCENARIO_FILE))?;
        let streams = read_streams(&dir.join(STREAMS_DIR))?;
        let vocab_path = dir.join(VOCABULARY_FILE);
        let vocab = if vocab_path.exists() { read_vocabulary(&vocab_path)? } else { Vocabulary::builtin() };
        Ok(Self { spec, streams, vocab })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(SCENARIO_FILE), &self.spec)?;
        write_streams(&dir.join(STREAMS_DIR), &self.streams)
    }

    pub fn session(&self) -> Interval {
        Interval::new(self.spec.epoch_ms, self.spec.epoch_ms + self.spec.duration_ms)
    }

    pub fn probes(&self) -> Result<Vec<ProbeWindow>> {
        let shells = schedule_probes(self.spec.epoch_ms, self.spec.duration_ms, &self.spec.duty_cycle)?;
        Ok(shells.iter().map(|s| self.streams.fill_probe(s)).collect())
    }
}

/// Detector output arranged for the prompt timeline. Confirmed segments get
/// interaction ids `1..=n` in closure order.
#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub output: ReplayOutput,
    pub probe_starts: Vec<(Millis, bool)>,
    pub closures: Vec<(u64, Interval, Millis)>,
    pub segments: BTreeMap<u64, InteractionSegment>,
}

pub fn replay(
    probes: &[ProbeWindow],
    provider: &dyn EmbeddingProvider,
    vocab: &Vocabulary,
    fsd: &mut FsdModel,
    cfg: &DetectorConfig,
) -> Result<ReplayRun> {
    let cues = CueVocabulary::new(vocab)?;
    let clock = Instant::now();
    let mut timer = || clock.elapsed().as_micros() as u64;
    let output = run_replay(probes, provider, &cues, fsd, cfg, &mut timer)?;
    let mut closures = Vec::new();
    let mut segments = BTreeMap::new();
    for c in &output.closed {
        if let Confirmation::Confirmed(seg) = &c.confirmation {
            let id = segments.len() as u64 + 1;
            closures.push((id, Interval::new(seg.start_ms, seg.end_ms), c.closed_at));
            segments.insert(id, seg.clone());
        }
    }
    let probe_starts = probes.iter().map(|p| (p.start, p.on_body)).collect();
    Ok(ReplayRun { output, probe_starts, closures, segments })
}

/// Small FSD trained on the provider's own synthetic clusters, for replays
/// without a trained checkpoint. Use the same `(dim, seed)` as the provider.
pub fn quick_fsd(provider: &SyntheticProvider, seed: u64) -> Result<FsdModel> {
    let data = synthetic_dataset(provider, 1_200, 0.5, derive_seed(seed, 0xF5D))?;
    let (train, val): (Vec<&FsdInstance>, Vec<&FsdInstance>) = data.iter().enumerate().fold(
        (Vec::new(), Vec::new()),
        |(mut t, mut v), (i, inst)| {
            if i % 5 == 0 { v.push(inst) } else { t.push(inst) }
            (t, v)
        },
    );
    let cfg = FrameClassifierConfig { hidden: vec![32], max_epochs: 10, seed, ..Default::default() };
    Ok(FsdModel::train(&train, &val, &cfg, MetaAlgorithm::NearestCentroid)?)
}

/// Writes sensor spectrogram images for every on-body probe. Returns how
/// many images were written.
pub fn export_sensor_images(
    store: &FeatureStore,
    probes: &[ProbeWindow],
    modalities: &[Modality],
    rates: &FeatureRates,
) -> Result<usize> {
    let sensors: Vec<Modality> = modalities.iter().copied().filter(|&m| m != Modality::Audio).collect();
    let mut n = 0;
    for p in probes.iter().filter(|p| p.on_body) {
        for (m, img) in probe_images(p, &sensors, rates)? {
            store.put_image(p.index, m, &img)?;
            n += 1;
        }
    }
    Ok(n)
}
