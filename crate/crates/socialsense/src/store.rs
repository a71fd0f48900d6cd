//! On-disk stores. Annotations and sensor features live in separate
//! directories so that losing or wiping one never touches the other.
//!
//! The annotation store is an append-only JSONL event log plus an
//! occasional compacted snapshot. Each append is flushed to disk before it
//! is acknowledged; on open, the snapshot is loaded and the log suffix after
//! it is replayed. A torn final line (crash mid-write) is dropped.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use socialsense_core::dsp::{SpectrogramImage, IMAGE_SIZE};
use socialsense_core::gateway::{AnnotationState, StoreEvent};
use socialsense_core::multimodal::{Modality, MultimodalSample};

use crate::error::{Error, IoContext, Result};
use crate::io::{read_jsonl, read_spgm, write_jsonl, write_spgm};

pub const ANNOTATIONS_DIR: &str = "annotations";
pub const FEATURES_DIR: &str = "features";
const LOG_FILE: &str = "events.jsonl";
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    state: AnnotationState,
}

#[derive(Debug)]
pub struct AnnotationStore {
    dir: PathBuf,
    log: File,
    state: AnnotationState,
    since_snapshot: u64,
    /// Events between automatic snapshots; 0 disables them.
    pub snapshot_every: u64,
}

impl AnnotationStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).at(dir)?;
        let (state, replayed, good_len) = load(dir)?;
        let log = open_append(&dir.join(LOG_FILE), good_len)?;
        Ok(Self { dir: dir.into(), log, state, since_snapshot: replayed, snapshot_every: 256 })
    }

    pub fn state(&self) -> &AnnotationState {
        &self.state
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    /// Durably appends the event, then applies it. Returns once the line is
    /// on disk.
    pub fn commit(&mut self, ev: StoreEvent) -> Result<()> {
        let path = self.log_path();
        let mut line = serde_json::to_vec(&ev).map_err(|source| Error::Json { path: path.clone(), line: 0, source })?;
        line.push(b'\n');
        self.log.write_all(&line).at(&path)?;
        self.log.sync_data().at(&path)?;
        self.state.apply(&ev);
        self.since_snapshot += 1;
        if self.snapshot_every > 0 && self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes the compacted state atomically (temp file, then rename).
    pub fn snapshot(&mut self) -> Result<()> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join("snapshot.json.tmp");
        let body = serde_json::to_vec(&Snapshot { state: self.state.clone() })
            .map_err(|source| Error::Json { path: tmp.clone(), line: 0, source })?;
        let mut f = File::create(&tmp).at(&tmp)?;
        f.write_all(&body).at(&tmp)?;
        f.sync_all().at(&tmp)?;
        fs::rename(&tmp, &path).at(&path)?;
        self.since_snapshot = 0;
        Ok(())
    }
}

/// Folds the snapshot and the log suffix after it without touching any
/// file. Returns the state, how many log events were replayed, and the
/// length of the valid log prefix.
fn load(dir: &Path) -> Result<(AnnotationState, u64, u64)> {
    let snap_path = dir.join(SNAPSHOT_FILE);
    let mut state = if snap_path.exists() {
        crate::io::read_json::<Snapshot>(&snap_path)?.state
    } else {
        AnnotationState::default()
    };
    let log_path = dir.join(LOG_FILE);
    let (events, good_len) = read_log::<StoreEvent>(&log_path)?;
    let skip = state.events_applied as usize;
    if events.len() < skip {
        return Err(Error::Format {
            path: log_path,
            reason: format!("snapshot covers {skip} events but the log holds {}", events.len()),
        });
    }
    for ev in &events[skip..] {
        state.apply(ev);
    }
    Ok((state, (events.len() - skip) as u64, good_len))
}

/// Read-only view of an annotation directory.
pub fn load_annotations(dir: &Path) -> Result<AnnotationState> {
    Ok(load(dir)?.0)
}

/// Opens a log for appending, cutting off anything past `good_len`.
pub(crate) fn open_append(path: &Path, good_len: u64) -> Result<File> {
    let f = OpenOptions::new().create(true).append(true).open(path).at(path)?;
    if f.metadata().at(path)?.len() > good_len {
        f.set_len(good_len).at(path)?;
    }
    Ok(f)
}

/// Parses the log, returning the events and the byte length of the valid
/// prefix. Only an unterminated final line may fail to parse.
pub(crate) fn read_log<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, u64)> {
    if !path.exists() {
        return Ok((Vec::new(), 0));
    }
    let mut reader = BufReader::new(File::open(path).at(path)?);
    let mut events = Vec::new();
    let mut good = 0u64;
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).at(path)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.ends_with('\n');
        if buf.trim().is_empty() {
            good += n as u64;
            continue;
        }
        match serde_json::from_str::<T>(buf.trim_end()) {
            Ok(ev) if terminated => {
                events.push(ev);
                good += n as u64;
            }
            Ok(_) | Err(_) if !terminated => {
                tracing::warn!(path = %path.display(), line = line_no, "dropping torn final log line");
                break;
            }
            Err(source) => return Err(Error::Json { path: path.into(), line: line_no, source }),
            Ok(_) => unreachable!(),
        }
    }
    Ok((events, good))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleIndex {
    probe: u64,
    participant: String,
    interaction: bool,
}

/// Spectrogram images per probe and modality, stored as
/// `probe-<index>/<modality>.spgm`, with a `samples.jsonl` label index.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    dir: PathBuf,
}

impl FeatureStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).at(dir)?;
        Ok(Self { dir: dir.into() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn image_path(&self, probe: u64, modality: Modality) -> PathBuf {
        self.dir.join(format!("probe-{probe:06}")).join(format!("{}.spgm", modality.name()))
    }

    pub fn put_image(&self, probe: u64, modality: Modality, image: &SpectrogramImage) -> Result<()> {
        write_spgm(&self.image_path(probe, modality), &image.pixels)
    }

    pub fn get_image(&self, probe: u64, modality: Modality) -> Result<SpectrogramImage> {
        let path = self.image_path(probe, modality);
        let m = read_spgm(&path)?;
        if m.rows != IMAGE_SIZE || m.cols != IMAGE_SIZE {
            return Err(Error::Format { path, reason: format!("image is {}x{}", m.rows, m.cols) });
        }
        Ok(SpectrogramImage::new(m)?)
    }

    /// Stores every image and rewrites the label index.
    pub fn write_samples(&self, samples: &[MultimodalSample]) -> Result<()> {
        for s in samples {
            for (&m, img) in &s.images {
                self.put_image(s.probe, m, img)?;
            }
        }
        let index = samples
            .iter()
            .map(|s| SampleIndex { probe: s.probe, participant: s.participant.clone(), interaction: s.interaction });
        write_jsonl(&self.dir.join("samples.jsonl"), index)
    }

    pub fn read_samples(&self, modalities: &[Modality]) -> Result<Vec<MultimodalSample>> {
        let index: Vec<SampleIndex> = read_jsonl(&self.dir.join("samples.jsonl"))?;
        index
            .into_iter()
            .map(|i| {
                let images = modalities
                    .iter()
                    .map(|&m| Ok((m, self.get_image(i.probe, m)?)))
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Ok(MultimodalSample { probe: i.probe, participant: i.participant, interaction: i.interaction, images })
            })
            .collect()
    }
}

/// Standard layout under one data root.
pub fn store_dirs(root: &Path) -> (PathBuf, PathBuf) {
    (root.join(ANNOTATIONS_DIR), root.join(FEATURES_DIR))
}
