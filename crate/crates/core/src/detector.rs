//! Interaction state machine over duty-cycled probes.
//!
//! A probe whose cue fraction reaches the onset threshold opens a candidate.
//! Following probes extend it while they pass the continuation rule; the
//! first probe that does not closes it. The closed interval runs from the
//! first probe's start to the last extending probe's end, and is confirmed
//! only if enough of its recorded seconds were the wearer's own speech.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audiofrontend::{cue_profile, slots_from_frames, CueVocabulary, EmbeddingProvider};
use crate::fsd::{fs_fraction, SlotClassifier};
use crate::sensorstream::{InteractionMode, ProbeWindow};
use crate::{Error, Millis, Result};

/// How a candidate decides whether the next probe extends it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuationRule {
    /// Cue fraction at or above the value.
    Threshold(f64),
    /// At least one cue second.
    AnyCue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub cue_threshold: f64,
    pub fs_threshold: f64,
    pub continuation: ContinuationRule,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { cue_threshold: 0.5, fs_threshold: 0.15, continuation: ContinuationRule::Threshold(0.5) }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        check("cue_threshold", self.cue_threshold)?;
        check("fs_threshold", self.fs_threshold)?;
        if let ContinuationRule::Threshold(t) = self.continuation {
            check("continuation threshold", t)?;
        }
        Ok(())
    }

    pub fn starts(&self, cue_fraction: f64) -> bool {
        cue_fraction >= self.cue_threshold
    }

    pub fn continues(&self, cue_fraction: f64) -> bool {
        match self.continuation {
            ContinuationRule::Threshold(t) => cue_fraction >= t,
            ContinuationRule::AnyCue => cue_fraction > 0.0,
        }
    }
}

/// What the detector needs to know about one processed probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub index: u64,
    pub start: Millis,
    pub end: Millis,
    pub on_body: bool,
    pub cue_fraction: f64,
    /// One entry per recorded second; empty when audio is missing.
    pub cue_mask: Vec<bool>,
    /// Foreground decision per second. Only cue seconds are classified; the
    /// rest are `false`.
    pub foreground: Vec<bool>,
}

impl ProbeResult {
    /// A probe that produced no usable audio.
    pub fn silent(index: u64, start: Millis, end: Millis, on_body: bool) -> Self {
        Self { index, start, end, on_body, cue_fraction: 0.0, cue_mask: Vec::new(), foreground: Vec::new() }
    }

    pub fn fg_count(&self) -> usize {
        self.cue_mask.iter().zip(&self.foreground).filter(|(&c, &f)| c && f).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Auto,
    Manual,
    Edited,
    Added,
}

/// A closed candidate awaiting the foreground check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub probes: u32,
    pub cue_mask: Vec<bool>,
    pub foreground: Vec<bool>,
    pub provenance: Provenance,
    /// Closed because the watch came off.
    pub truncated: bool,
}

impl Candidate {
    pub fn fs_fraction(&self) -> Result<f64> {
        fs_fraction(&self.cue_mask, &self.foreground)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionSegment {
    pub start_ms: Millis,
    pub end_ms: Millis,
    pub fs_fraction: f64,
    pub probes: u32,
    pub provenance: Provenance,
    #[serde(default)]
    pub mode: InteractionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum Confirmation {
    Confirmed(InteractionSegment),
    Rejected { start_ms: Millis, end_ms: Millis, fs_fraction: f64, probes: u32 },
}

/// Applies the foreground check. Manual candidates are confirmed as-is.
pub fn confirm_segment(candidate: &Candidate, cfg: &DetectorConfig) -> Confirmation {
    let fs = candidate.fs_fraction().unwrap_or(0.0);
    let segment = InteractionSegment {
        start_ms: candidate.start_ms,
        end_ms: candidate.end_ms,
        fs_fraction: fs,
        probes: candidate.probes,
        provenance: candidate.provenance,
        mode: InteractionMode::Unknown,
    };
    if candidate.provenance == Provenance::Manual || fs >= cfg.fs_threshold {
        Confirmation::Confirmed(segment)
    } else {
        Confirmation::Rejected { start_ms: candidate.start_ms, end_ms: candidate.end_ms, fs_fraction: fs, probes: candidate.probes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Idle,
    Candidate {
        start_ms: Millis,
        last_cue_end: Millis,
        probes: u32,
        cue_mask: Vec<bool>,
        foreground: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectorEvent {
    Onset { start_ms: Millis },
    Extended { last_cue_end: Millis },
    Closed(Candidate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub phase: Phase,
    pub last_index: Option<u64>,
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectorState {
    pub fn new() -> Self {
        Self { phase: Phase::Idle, last_index: None }
    }

    fn close(&mut self, truncated: bool) -> Option<Candidate> {
        match core::mem::replace(&mut self.phase, Phase::Idle) {
            Phase::Idle => None,
            Phase::Candidate { start_ms, last_cue_end, probes, cue_mask, foreground } => Some(Candidate {
                start_ms,
                end_ms: last_cue_end,
                probes,
                cue_mask,
                foreground,
                provenance: Provenance::Auto,
                truncated,
            }),
        }
    }

    /// Advances the machine by one probe. Probes must arrive in schedule
    /// order.
    pub fn process_probe(&mut self, probe: &ProbeResult, cfg: &DetectorConfig) -> Result<Vec<DetectorEvent>> {
        if let Some(last) = self.last_index {
            if probe.index <= last {
                return Err(Error::Sequencing { last, got: probe.index });
            }
        }
        if probe.cue_mask.len() != probe.foreground.len() {
            return Err(Error::shape(format!("{} foreground flags", probe.cue_mask.len()), format!("{}", probe.foreground.len())));
        }
        self.last_index = Some(probe.index);
        let mut events = Vec::new();

        if !probe.on_body {
            // Nothing is recorded while the watch is off; the candidate ends
            // with the last recording, which is the last extending probe.
            events.extend(self.close(true).map(DetectorEvent::Closed));
            return Ok(events);
        }

        if let Phase::Candidate { last_cue_end, probes, cue_mask, foreground, .. } = &mut self.phase {
            if cfg.continues(probe.cue_fraction) {
                *last_cue_end = probe.end;
                *probes += 1;
                cue_mask.extend_from_slice(&probe.cue_mask);
                foreground.extend_from_slice(&probe.foreground);
                events.push(DetectorEvent::Extended { last_cue_end: probe.end });
                return Ok(events);
            }
            events.extend(self.close(false).map(DetectorEvent::Closed));
        }

        if cfg.starts(probe.cue_fraction) {
            self.phase = Phase::Candidate {
                start_ms: probe.start,
                last_cue_end: probe.end,
                probes: 1,
                cue_mask: probe.cue_mask.clone(),
                foreground: probe.foreground.clone(),
            };
            events.push(DetectorEvent::Onset { start_ms: probe.start });
        }
        Ok(events)
    }

    /// Closes any open candidate at the end of the stream.
    pub fn finish(&mut self) -> Option<Candidate> {
        self.close(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoStop {
    Continue,
    Stop,
}

/// For manual recordings: stop once fewer than the cue threshold share of the
/// buffered last seconds carry cues.
pub fn manual_autostop(recent_cues: &[bool], cfg: &DetectorConfig) -> AutoStop {
    if recent_cues.is_empty() {
        return AutoStop::Stop;
    }
    let n = recent_cues.iter().filter(|&&c| c).count();
    if (n as f64) < cfg.cue_threshold * recent_cues.len() as f64 {
        AutoStop::Stop
    } else {
        AutoStop::Continue
    }
}

/// Per-probe line of the replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLogEntry {
    pub index: u64,
    pub start_ms: Millis,
    pub on_body: bool,
    pub audio: bool,
    pub cue_fraction: f64,
    pub cue_slots: usize,
    pub fg_slots: usize,
    /// Processing time as reported by the caller's timer, in microseconds.
    pub latency_us: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<alloc::string::String>,
}

/// A closed candidate with its verdict and the time it closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCandidate {
    pub closed_at: Millis,
    pub confirmation: Confirmation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutput {
    pub segments: Vec<InteractionSegment>,
    pub closed: Vec<ClosedCandidate>,
    pub log: Vec<ProbeLogEntry>,
    pub results: Vec<ProbeResult>,
}

/// Turns one probe window into a [`ProbeResult`]. Missing audio yields a
/// cue-negative probe and the reason.
pub fn analyze_probe(
    probe: &ProbeWindow,
    provider: &dyn EmbeddingProvider,
    cues: &CueVocabulary,
    fsd: &mut dyn SlotClassifier,
) -> Result<(ProbeResult, Option<alloc::string::String>)> {
    if !probe.on_body {
        return Ok((ProbeResult::silent(probe.index, probe.start, probe.end, false), Some("off-body".into())));
    }
    let frames = match provider.embed_probe(probe) {
        Ok(f) => f,
        Err(e @ (Error::MissingModality(_) | Error::NotFound(_))) => {
            return Ok((ProbeResult::silent(probe.index, probe.start, probe.end, true), Some(format!("{e}"))));
        }
        Err(e) => return Err(e),
    };
    let expected = (probe.duration_ms() / 1_000) as usize;
    let slots = slots_from_frames(&frames, cues)?;
    let profile = cue_profile(&slots, expected)?;
    let mut foreground = Vec::with_capacity(slots.len());
    for s in &slots {
        let fg = if s.is_cue { fsd.is_foreground(&frames[s.frames.0..=s.frames.1])? } else { false };
        foreground.push(fg);
    }
    Ok((
        ProbeResult {
            index: probe.index,
            start: probe.start,
            end: probe.end,
            on_body: true,
            cue_fraction: profile.cue_fraction,
            cue_mask: profile.mask,
            foreground,
        },
        None,
    ))
}

/// Feeds a sequence of probe results through the state machine. A candidate
/// closed by probe `p` is considered closed at `p.end`, when that probe's
/// processing completes; one still open at the end closes at the last
/// probe's end.
pub fn detect(results: &[ProbeResult], cfg: &DetectorConfig) -> Result<(Vec<InteractionSegment>, Vec<ClosedCandidate>)> {
    cfg.validate()?;
    let mut state = DetectorState::new();
    let mut closed = Vec::new();
    let mut segments = Vec::new();
    let mut push = |c: Candidate, at: Millis| {
        let confirmation = confirm_segment(&c, cfg);
        if let Confirmation::Confirmed(s) = &confirmation {
            segments.push(*s);
        }
        closed.push(ClosedCandidate { closed_at: at, confirmation });
    };
    for r in results {
        for ev in state.process_probe(r, cfg)? {
            if let DetectorEvent::Closed(c) = ev {
                push(c, r.end);
            }
        }
    }
    if let Some(c) = state.finish() {
        push(c, results.last().map_or(0, |r| r.end));
    }
    Ok((segments, closed))
}

/// Full replay: embeds every probe, detects cues, runs the FSD on cue
/// seconds, and segments. `timer` returns a monotonic microsecond count used
/// for the per-probe latency column.
pub fn run_replay(
    probes: &[ProbeWindow],
    provider: &dyn EmbeddingProvider,
    cues: &CueVocabulary,
    fsd: &mut dyn SlotClassifier,
    cfg: &DetectorConfig,
    timer: &mut dyn FnMut() -> u64,
) -> Result<ReplayOutput> {
    cfg.validate()?;
    let mut out = ReplayOutput::default();
    for p in probes {
        let t0 = timer();
        let (r, skipped) = analyze_probe(p, provider, cues, fsd)?;
        let latency_us = timer().saturating_sub(t0);
        out.log.push(ProbeLogEntry {
            index: r.index,
            start_ms: r.start,
            on_body: r.on_body,
            audio: skipped.is_none(),
            cue_fraction: r.cue_fraction,
            cue_slots: r.cue_mask.iter().filter(|&&c| c).count(),
            fg_slots: r.fg_count(),
            latency_us,
            skipped,
        });
        out.results.push(r);
    }
    let (segments, closed) = detect(&out.results, cfg)?;
    out.segments = segments;
    out.closed = closed;
    Ok(out)
}
