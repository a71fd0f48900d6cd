use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Size of the audio-event class vocabulary.
pub const NUM_CLASSES: usize = 521;

/// Classes whose top score marks a one-second slot as an interaction cue.
pub const CUE_CLASS_NAMES: [&str; 12] = [
    "Conversation",
    "Chatter",
    "Whispering",
    "Speech",
    "Shout",
    "Screaming",
    "Laughter",
    "Wail, Moan",
    "Groan",
    "Narration, Monologue",
    "Child speech, Kid Speaking",
    "Clapping",
];

// Named head of the built-in vocabulary; the remainder is filled with
// placeholders. Load the model's class map with `Vocabulary::from_lines` for
// real embeddings.
const BUILTIN_HEAD: &[&str] = &[
    "Speech",
    "Child speech, kid speaking",
    "Conversation",
    "Narration, monologue",
    "Babbling",
    "Speech synthesizer",
    "Shout",
    "Screaming",
    "Whispering",
    "Laughter",
    "Wail, moan",
    "Groan",
    "Chatter",
    "Clapping",
    "Singing",
    "Music",
    "Television",
    "Radio",
    "Silence",
    "Inside, small room",
    "Walk, footsteps",
    "Typing",
    "Vehicle",
    "Wind",
    "Water",
    "Dog",
    "Dishes, pots, and pans",
    "Noise",
];

/// Ordered class names; a class index is its position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn builtin() -> Self {
        let mut names: Vec<String> = BUILTIN_HEAD.iter().map(|s| s.to_string()).collect();
        while names.len() < NUM_CLASSES {
            names.push(format!("Class {:03}", names.len()));
        }
        Self { names }
    }

    /// Parses a class list with one name per line (index = line number).
    pub fn from_lines(text: &str) -> Result<Self> {
        let names: Vec<String> = text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if names.len() != NUM_CLASSES {
            return Err(Error::shape(
                format!("{NUM_CLASSES} class names"),
                format!("{}", names.len()),
            ));
        }
        Ok(Self { names })
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    /// Case-insensitive lookup.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }
}

/// The cue classes resolved against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueVocabulary {
    indices: Vec<usize>,
    is_cue: Vec<bool>,
}

impl CueVocabulary {
    pub fn new(vocab: &Vocabulary) -> Result<Self> {
        let mut indices = Vec::with_capacity(CUE_CLASS_NAMES.len());
        for name in CUE_CLASS_NAMES {
            let idx = vocab
                .index_of(name)
                .ok_or_else(|| Error::NotFound(format!("cue class `{name}` in vocabulary")))?;
            indices.push(idx);
        }
        let mut is_cue = alloc::vec![false; vocab.len()];
        for &i in &indices {
            is_cue[i] = true;
        }
        Ok(Self { indices, is_cue })
    }

    pub fn contains(&self, class: usize) -> bool {
        self.is_cue.get(class).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}
