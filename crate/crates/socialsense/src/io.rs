//! File formats: JSONL records, per-sensor stream files, SPGM spectrogram
//! files, precomputed embeddings, vocabularies, and segment logs.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use socialsense_core::audiofrontend::{decode_precomputed, encode_precomputed, AudioFrame, PrecomputedProvider, Vocabulary};
use socialsense_core::detector::{InteractionSegment, Provenance};
use socialsense_core::dsp::{decode_spgm, encode_spgm, Matrix};
use socialsense_core::sensorstream::{SensorKind, SensorSample, SensorStreams};
use socialsense_core::Millis;

use crate::error::{Error, IoContext, Result};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Json { path: path.into(), line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).at(path)?);
    for item in items {
        let line = serde_json::to_string(&item).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
        writeln!(w, "{line}").at(path)?;
    }
    w.flush().at(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), line: source.line(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.into(), line: 0, source })?;
    fs::write(path, text + "\n").at(path)
}

fn stream_path(dir: &Path, kind: SensorKind) -> PathBuf {
    dir.join(format!("{}.jsonl", kind.name()))
}

/// One `<kind>.jsonl` file per sensor kind with `{t_ms, values}` records.
pub fn write_streams(dir: &Path, streams: &SensorStreams) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for kind in SensorKind::ALL {
        write_jsonl(&stream_path(dir, kind), streams.stream(kind))?;
    }
    Ok(())
}

/// Reads whichever stream files exist; missing kinds stay empty.
pub fn read_streams(dir: &Path) -> Result<SensorStreams> {
    let mut streams = SensorStreams::new();
    for kind in SensorKind::ALL {
        let path = stream_path(dir, kind);
        if !path.exists() {
            continue;
        }
        for s in read_jsonl::<SensorSample>(&path)? {
            streams.push(kind, s);
        }
    }
    streams.validate()?;
    Ok(streams)
}

pub fn write_spgm(path: &Path, m: &Matrix) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, encode_spgm(m)).at(path)
}

pub fn read_spgm(path: &Path) -> Result<Matrix> {
    Ok(decode_spgm(&fs::read(path).at(path)?)?)
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    Ok(Vocabulary::from_lines(&fs::read_to_string(path).at(path)?)?)
}

pub fn write_embeddings(path: &Path, frames: &[AudioFrame]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, encode_precomputed(frames)?).at(path)
}

/// Loads `probe-<index>.emb` files from a directory.
pub fn read_embeddings_dir(dir: &Path, dim: usize) -> Result<PrecomputedProvider> {
    let mut provider = PrecomputedProvider::new(dim);
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        let Some(index) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("probe-")?.strip_suffix(".emb"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        let frames = decode_precomputed(&fs::read(&path).at(&path)?)?;
        provider.insert(index, frames)?;
    }
    Ok(provider)
}

pub fn embeddings_path(dir: &Path, probe_index: u64) -> PathBuf {
    dir.join(format!("probe-{probe_index:06}.emb"))
}

/// Segment log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub fs_fraction: f64,
    pub probes: u32,
    pub provenance: Provenance,
}

impl From<&InteractionSegment> for SegmentRecord {
    fn from(s: &InteractionSegment) -> Self {
        Self { start_ms: s.start_ms, end_ms: s.end_ms, fs_fraction: s.fs_fraction, probes: s.probes, provenance: s.provenance }
    }
}

pub fn write_segment_log(path: &Path, segments: &[InteractionSegment]) -> Result<()> {
    write_jsonl(path, segments.iter().map(SegmentRecord::from))
}

pub fn read_segment_log(path: &Path) -> Result<Vec<SegmentRecord>> {
    read_jsonl(path)
}
