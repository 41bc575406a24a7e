//! The labeled sound library.
//!
//! Persistence is JSON lines, one record per sound with its labels inline:
//!
//! ```text
//! {"sound_id":7,"file_ref":"sounds/0007.wav","duration_s":42.5,"labels":[
//!   {"text":"calm drift","labeler_id":"labeler-03","created_at":1688169600000,
//!    "embedding":{"values":[...],"model_id":"..."}}]}
//! ```
//!
//! `created_at` is milliseconds since the Unix epoch. Audio is referenced by
//! `file_ref` only.

mod assign;
mod fixture;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantic::{normalize_label, Embedding, EmbeddingProvider, ProviderError, MAX_LABEL_WORDS};
use crate::time::Timestamp;

pub use assign::LabelingSession;
pub use fixture::{generate_fixture_library, FixtureParams, LABEL_VOCABULARY};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("unknown sound {0}")]
    UnknownSound(u32),
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("label {0:?} has more than {MAX_LABEL_WORDS} words")]
    LabelTooLong(String),
    #[error("library is empty")]
    EmptyLibrary,
    #[error("sound {0} already exists")]
    DuplicateSound(u32),
    #[error("invalid sound asset {id}: {detail}")]
    InvalidAsset { id: u32, detail: String },
    #[error("embedding dimension {found} does not match library dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Embedding(#[from] ProviderError),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionLabel {
    pub text: String,
    pub labeler_id: String,
    pub created_at: Timestamp,
    pub embedding: Embedding,
}

impl EmotionLabel {
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundAsset {
    pub sound_id: u32,
    pub file_ref: String,
    pub duration_s: f64,
    #[serde(default)]
    pub labels: Vec<EmotionLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub total_sounds: usize,
    pub labeled_sounds: usize,
    pub multi_labeled_sounds: usize,
    /// 0 when nothing is labeled.
    pub mean_words_per_label: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoundLibrary {
    dimension: usize,
    sounds: BTreeMap<u32, SoundAsset>,
}

impl SoundLibrary {
    pub fn new(dimension: usize) -> Self {
        SoundLibrary { dimension, sounds: BTreeMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.sounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sounds.is_empty()
    }

    pub fn get(&self, sound_id: u32) -> Option<&SoundAsset> {
        self.sounds.get(&sound_id)
    }

    /// Sounds in ascending id order.
    pub fn sounds(&self) -> impl Iterator<Item = &SoundAsset> {
        self.sounds.values()
    }

    pub fn sound_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.sounds.keys().copied()
    }

    pub fn insert_sound(&mut self, asset: SoundAsset) -> Result<(), LibraryError> {
        if self.sounds.contains_key(&asset.sound_id) {
            return Err(LibraryError::DuplicateSound(asset.sound_id));
        }
        if !(asset.duration_s > 0.0 && asset.duration_s.is_finite()) {
            return Err(LibraryError::InvalidAsset {
                id: asset.sound_id,
                detail: format!("duration {} is not positive", asset.duration_s),
            });
        }
        for label in &asset.labels {
            self.check_dimension(&label.embedding)?;
            if normalize_label(&label.text).is_empty() {
                return Err(LibraryError::EmptyLabel);
            }
        }
        self.sounds.insert(asset.sound_id, asset);
        Ok(())
    }

    fn check_dimension(&self, e: &Embedding) -> Result<(), LibraryError> {
        if e.dimension() != self.dimension {
            return Err(LibraryError::DimensionMismatch { expected: self.dimension, found: e.dimension() });
        }
        Ok(())
    }

    /// Stores a normalized label with its embedding. Adding the same
    /// `(sound, labeler, text)` again returns the stored label unchanged.
    pub fn add_label(
        &mut self,
        sound_id: u32,
        text: &str,
        labeler_id: &str,
        emb: &dyn EmbeddingProvider,
        now: Timestamp,
    ) -> Result<EmotionLabel, LibraryError> {
        let text = normalize_label(text);
        if text.is_empty() {
            return Err(LibraryError::EmptyLabel);
        }
        if text.split_whitespace().count() > MAX_LABEL_WORDS {
            return Err(LibraryError::LabelTooLong(text));
        }
        let asset = self.sounds.get(&sound_id).ok_or(LibraryError::UnknownSound(sound_id))?;
        if let Some(existing) = asset.labels.iter().find(|l| l.labeler_id == labeler_id && l.text == text) {
            return Ok(existing.clone());
        }
        let embedding = emb.embed(&text)?;
        self.check_dimension(&embedding)?;
        let label = EmotionLabel { text, labeler_id: labeler_id.to_string(), created_at: now, embedding };
        self.sounds.get_mut(&sound_id).expect("checked above").labels.push(label.clone());
        Ok(label)
    }

    pub fn labeled_by(&self, labeler_id: &str) -> BTreeSet<u32> {
        self.sounds
            .values()
            .filter(|s| s.labels.iter().any(|l| l.labeler_id == labeler_id))
            .map(|s| s.sound_id)
            .collect()
    }

    pub fn coverage_stats(&self) -> CoverageStats {
        let labeled = self.sounds.values().filter(|s| !s.labels.is_empty()).count();
        let multi = self.sounds.values().filter(|s| s.labels.len() > 1).count();
        let (words, labels) = self
            .sounds
            .values()
            .flat_map(|s| &s.labels)
            .fold((0usize, 0usize), |(w, n), l| (w + l.word_count(), n + 1));
        CoverageStats {
            total_sounds: self.sounds.len(),
            labeled_sounds: labeled,
            multi_labeled_sounds: multi,
            mean_words_per_label: if labels == 0 { 0.0 } else { words as f64 / labels as f64 },
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), LibraryError> {
        for asset in self.sounds.values() {
            serde_json::to_writer(&mut out, asset).map_err(|e| LibraryError::Io(e.into()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, dimension: usize) -> Result<Self, LibraryError> {
        let mut lib = SoundLibrary::new(dimension);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let asset: SoundAsset =
                serde_json::from_str(&line).map_err(|e| LibraryError::Parse { line: i + 1, detail: e.to_string() })?;
            lib.insert_sound(asset).map_err(|e| LibraryError::Parse { line: i + 1, detail: e.to_string() })?;
        }
        Ok(lib)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LibraryError> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>, dimension: usize) -> Result<Self, LibraryError> {
        let file = std::fs::File::open(path)?;
        SoundLibrary::read_jsonl(std::io::BufReader::new(file), dimension)
    }
}
