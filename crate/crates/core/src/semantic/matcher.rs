//! Label-to-label matching of a narration against the sound library.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::providers::{with_retry, EmbeddingProvider};
use super::{cosine_similarity, Embedding, LayerNarration, SemanticError};
use crate::layers::LayerId;
use crate::library::SoundLibrary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub layer_id: LayerId,
    pub sound_id: u32,
    pub similarity: f64,
    /// (narration label, sound label) of the best-scoring pair.
    pub matched_label_pair: (String, String),
}

/// Embeds the narration labels and ranks sounds with [`rank_sounds`].
pub fn match_sounds(
    narration: &LayerNarration,
    library: &SoundLibrary,
    emb: &dyn EmbeddingProvider,
    k: usize,
) -> Result<Vec<MatchResult>, SemanticError> {
    if library.is_empty() {
        return Err(SemanticError::EmptyLibrary);
    }
    let labels = narration
        .emotion_labels
        .iter()
        .map(|l| with_retry(|| emb.embed(l)).map(|e| (l.clone(), e)))
        .collect::<Result<Vec<_>, _>>()?;
    rank_sounds(narration.layer_id, &labels, library, k)
}

/// A sound scores the best cosine similarity over all of its labels paired
/// with all narration labels. Returns the top `k` by score, descending, ties
/// broken by ascending sound id. Unlabeled sounds are not ranked.
pub fn rank_sounds(
    layer_id: LayerId,
    narration_labels: &[(String, Embedding)],
    library: &SoundLibrary,
    k: usize,
) -> Result<Vec<MatchResult>, SemanticError> {
    if k == 0 {
        return Err(SemanticError::ZeroK);
    }
    let mut scored: Vec<MatchResult> = Vec::new();
    for sound in library.sounds() {
        let mut best: Option<(f64, &str, &str)> = None;
        for (text, embedding) in narration_labels {
            for label in &sound.labels {
                let sim = cosine_similarity(embedding, &label.embedding)?;
                if best.is_none_or(|(b, _, _)| sim > b) {
                    best = Some((sim, text, &label.text));
                }
            }
        }
        if let Some((similarity, ours, theirs)) = best {
            scored.push(MatchResult {
                layer_id,
                sound_id: sound.sound_id,
                similarity,
                matched_label_pair: (ours.to_string(), theirs.to_string()),
            });
        }
    }
    if scored.is_empty() {
        return Err(SemanticError::EmptyLibrary);
    }
    scored.sort_by(|a, b| match b.similarity.total_cmp(&a.similarity) {
        Ordering::Equal => a.sound_id.cmp(&b.sound_id),
        o => o,
    });
    scored.truncate(k);
    Ok(scored)
}

/// Layer activity: the top similarity, floored at zero.
pub fn activity_from_matches(matches: &[MatchResult]) -> f64 {
    matches.first().map_or(0.0, |m| m.similarity.clamp(0.0, 1.0))
}
