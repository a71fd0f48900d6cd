//! Audio-event model interface and one-second interaction-cue detection.
//!
//! The pretrained 521-class audio-event network is not part of this crate.
//! Frames come from an [`EmbeddingProvider`]: either the scenario-driven
//! [`SyntheticProvider`] or stored vectors via [`PrecomputedProvider`].

mod provider;
mod vocab;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use provider::{
    decode_precomputed, encode_precomputed, EmbeddingProvider, PrecomputedProvider,
    SyntheticProvider, FRAMES_PER_SLOT,
};
pub use vocab::{CueVocabulary, Vocabulary, CUE_CLASS_NAMES, NUM_CLASSES};

/// Embedding for one 0.48 s frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEmbedding(pub Vec<f64>);

/// Per-frame class scores, one entry per vocabulary class, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScores(Vec<f64>);

impl FrameScores {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.len() != NUM_CLASSES {
            return Err(Error::shape(
                alloc::format!("{NUM_CLASSES} class scores"),
                alloc::format!("{}", scores.len()),
            ));
        }
        if let Some(bad) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::validation(
                alloc::format!("scores[{bad}]"),
                "class score outside [0, 1]",
            ));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Output of the audio-event model for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFrame {
    pub embedding: FrameEmbedding,
    pub scores: FrameScores,
}

/// Top class of a one-second slot and whether it is an interaction cue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueDecision {
    pub top_class: usize,
    pub is_cue: bool,
}

/// Averages the two frame score vectors and takes the argmax. Ties go to the
/// lowest class index.
pub fn detect_cue(first: &[f64], second: &[f64], cues: &CueVocabulary) -> Result<CueDecision> {
    for v in [first, second] {
        if v.len() != NUM_CLASSES {
            return Err(Error::shape(
                alloc::format!("{NUM_CLASSES} class scores"),
                alloc::format!("{}", v.len()),
            ));
        }
    }
    let mut top_class = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, (a, b)) in first.iter().zip(second).enumerate() {
        let mean = (a + b) / 2.0;
        if mean > best {
            best = mean;
            top_class = i;
        }
    }
    Ok(CueDecision {
        top_class,
        is_cue: cues.contains(top_class),
    })
}

/// One non-overlapping second of a probe, covered by two consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondSlot {
    pub slot: usize,
    pub frames: (usize, usize),
    pub is_cue: bool,
    pub top_class: usize,
}

/// Groups a probe's frames into one-second slots and runs cue detection.
pub fn slots_from_frames(frames: &[AudioFrame], cues: &CueVocabulary) -> Result<Vec<SecondSlot>> {
    if frames.len() % FRAMES_PER_SLOT != 0 {
        return Err(Error::shape(
            "an even number of frames",
            alloc::format!("{}", frames.len()),
        ));
    }
    frames
        .chunks_exact(FRAMES_PER_SLOT)
        .enumerate()
        .map(|(slot, pair)| {
            let d = detect_cue(pair[0].scores.as_slice(), pair[1].scores.as_slice(), cues)?;
            Ok(SecondSlot {
                slot,
                frames: (slot * 2, slot * 2 + 1),
                is_cue: d.is_cue,
                top_class: d.top_class,
            })
        })
        .collect()
}

/// Per-slot cue mask for one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueProfile {
    pub mask: Vec<bool>,
    pub cue_fraction: f64,
}

/// Fraction of cue-positive slots. `expected_slots` is the window length in
/// seconds (15 for the default duty cycle).
pub fn cue_profile(slots: &[SecondSlot], expected_slots: usize) -> Result<CueProfile> {
    if slots.len() != expected_slots || expected_slots == 0 {
        return Err(Error::shape(
            alloc::format!("{expected_slots} slots"),
            alloc::format!("{}", slots.len()),
        ));
    }
    let mask: Vec<bool> = slots.iter().map(|s| s.is_cue).collect();
    let n = mask.iter().filter(|&&c| c).count();
    Ok(CueProfile {
        cue_fraction: n as f64 / expected_slots as f64,
        mask,
    })
}
