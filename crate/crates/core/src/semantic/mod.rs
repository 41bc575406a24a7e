//! From data snapshots to narrations, and from narration labels to sounds.

mod embedding;
mod labels;
mod matcher;
mod narrate;
mod prompt;
mod providers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::LayerId;
use crate::time::Timestamp;

pub use embedding::{cosine_similarity, Embedding};
pub use labels::{normalize_label, parse_labels, MAX_LABEL_WORDS};
pub use matcher::{activity_from_matches, match_sounds, rank_sounds, MatchResult};
pub use narrate::narrate;
pub use prompt::{serialize_payload_for_prompt, PromptTemplate, PROMPT_CHAR_LIMIT, PROMPT_VERSION};
pub use providers::{
    with_retry, EmbeddingProvider, HashEmbedder, ProviderError, StubTextGen, TextGenProvider, REFERENCE_DIMENSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot compare a zero vector")]
    ZeroVector,
    #[error("generation failed after {attempts} attempts: {detail}")]
    GenerationFailed { attempts: u32, detail: String },
    #[error("could not extract three labels: {0}")]
    LabelParse(String),
    #[error("sound library has no labeled sounds")]
    EmptyLibrary,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("prompt template `{template}` has no value for `{placeholder}`")]
    MissingPlaceholder { template: String, placeholder: String },
}

/// Identifies the snapshot a narration was generated from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub layer_id: LayerId,
    pub fetched_at: Timestamp,
    /// First 16 hex digits of the SHA-256 of the raw payload.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerNarration {
    pub layer_id: LayerId,
    pub sentence: String,
    pub emotion_labels: [String; 3],
    pub generated_at: Timestamp,
    pub source_snapshot_ref: SnapshotRef,
}
