//! Report files for the `evaluate` command: JSON plus flat CSV tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use socialsense_core::detector::Provenance;
use socialsense_core::evaluation::{DeploymentReport, DetectionOutcome, MetricsReport};
use socialsense_core::gateway::{AnnotationState, PromptKind};
use socialsense_core::sensorstream::Interval;

use crate::error::{Error, IoContext, Result};
use crate::io::{write_json, SegmentRecord};

/// Pairs each logged detection with the participant's latest answer.
/// Detections are matched to stored interactions by their detected bounds;
/// edited and added interactions become the confirmed intervals.
pub fn detection_outcomes(
    participant: &str,
    segments: &[SegmentRecord],
    state: &AnnotationState,
) -> (Vec<DetectionOutcome>, BTreeMap<String, Vec<Interval>>) {
    let mut prompt_for: BTreeMap<u64, u64> = BTreeMap::new();
    for p in state.prompts.values().filter(|p| p.kind == PromptKind::DetectedInteraction) {
        if let Some(id) = p.interaction_id {
            prompt_for.insert(id, p.id);
        }
    }
    let outcomes = segments
        .iter()
        .map(|s| {
            let iv = Interval::new(s.start_ms, s.end_ms);
            let stored = state.interactions.values().find(|i| i.detected == Some(iv));
            let prompt = stored.and_then(|i| prompt_for.get(&i.id)).and_then(|pid| state.prompts.get(pid));
            let answer = prompt.and_then(|p| state.latest_response(p.id));
            DetectionOutcome {
                participant: participant.to_string(),
                segment: iv,
                response: answer.map(|a| a.answer),
                mode: stored.map(|i| i.mode).unwrap_or_default(),
                prompted_ms: prompt.map(|p| p.issued_at),
                responded_ms: answer.map(|a| a.submitted_at),
            }
        })
        .collect();
    let confirmed = state
        .interactions
        .values()
        .filter(|i| matches!(i.provenance, Provenance::Edited | Provenance::Added))
        .map(|i| i.interval())
        .collect();
    (outcomes, BTreeMap::from([(participant.to_string(), confirmed)]))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Format { path: path.into(), reason: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().at(path)
}

/// `deployment.json`, `participants.csv`, `latency.csv`, `durations.csv`,
/// and `modes.csv`.
pub fn write_deployment(dir: &Path, report: &DeploymentReport) -> Result<()> {
    write_json(&dir.join("deployment.json"), report)?;
    write_csv(&dir.join("participants.csv"), &report.participants)?;
    write_csv(&dir.join("latency.csv"), [report.latency])?;
    #[derive(Serialize)]
    struct Bin<'a> {
        label: &'a str,
        lo_ms: u64,
        hi_ms: Option<u64>,
        count: u64,
    }
    let bins = report.durations.iter().map(|b| Bin { label: &b.label, lo_ms: b.lo_ms, hi_ms: b.hi_ms, count: b.count });
    write_csv(&dir.join("durations.csv"), bins)?;
    #[derive(Serialize)]
    struct Mode<'a> {
        mode: &'a str,
        count: u64,
    }
    write_csv(&dir.join("modes.csv"), report.modes.iter().map(|(m, &count)| Mode { mode: m, count }))
}

/// `<name>.json` and `<name>.csv` with a single metrics row.
pub fn write_metrics(dir: &Path, name: &str, metrics: &MetricsReport) -> Result<()> {
    write_json(&dir.join(format!("{name}.json")), metrics)?;
    write_csv(&dir.join(format!("{name}.csv")), [metrics])
}
