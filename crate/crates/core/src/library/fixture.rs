//! Synthetic library generator standing in for the human-labeled corpus.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmotionLabel, LibraryError, SoundAsset, SoundLibrary};
use crate::semantic::{Embedding, EmbeddingProvider};
use crate::time::Timestamp;

/// Label phrases for generated corpora. Includes the stub narrator's label
/// table so offline runs find exact matches.
pub const LABEL_VOCABULARY: &[&str] = &[
    "calm",
    "rising",
    "heavy",
    "heavy concern",
    "restless",
    "playful",
    "fleeting chatter",
    "steady",
    "cautious",
    "quiet optimism",
    "patient",
    "solid",
    "slow growth",
    "measured",
    "careful order",
    "curious",
    "nostalgic",
    "warm",
    "melancholy",
    "tense but hopeful",
    "a calm morning by the lake",
    "like waiting for something good",
    "warm and a little sad",
    "restless energy before a storm",
    "the feeling of slow rain",
    "bright and open",
    "lonely but peaceful",
    "gentle curiosity",
    "floating in warm water",
    "a sense of distance",
    "busy city sounds",
    "uneasy anticipation",
    "soft joy",
    "dreamy and far away",
    "walking through tall grass",
    "cold and empty room",
    "hopeful beginnings",
    "sun through the leaves",
    "quiet determination",
    "memories of childhood summers",
    "mysterious",
    "slightly anxious",
    "wide open sky at dusk",
    "grounded",
    "playful birdsong in the morning",
    "bittersweet",
    "ancient and slow",
    "drifting",
    "electric excitement",
    "a long exhale",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixtureParams {
    pub sounds: u32,
    /// Sounds that receive two to four labels; every other sound gets one.
    pub multi_labeled: u32,
    pub labelers: u32,
    pub seed: u64,
}

impl FixtureParams {
    /// Multi-labeled share of 219 in 1050, rounded.
    pub fn with_default_shape(sounds: u32, seed: u64) -> Self {
        FixtureParams { sounds, multi_labeled: ((sounds as u64 * 219 + 525) / 1050) as u32, labelers: 80, seed }
    }
}

pub fn generate_fixture_library(
    params: FixtureParams,
    emb: &dyn EmbeddingProvider,
) -> Result<SoundLibrary, LibraryError> {
    if params.multi_labeled > params.sounds {
        return Err(LibraryError::InvalidAsset {
            id: params.multi_labeled,
            detail: format!("cannot multi-label {} of {} sounds", params.multi_labeled, params.sounds),
        });
    }
    let labelers = params.labelers.max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache: HashMap<&str, Embedding> = HashMap::new();

    let mut ids: Vec<u32> = (1..=params.sounds).collect();
    ids.shuffle(&mut rng);
    let multi: std::collections::HashSet<u32> = ids[..params.multi_labeled as usize].iter().copied().collect();

    let base = Timestamp::parse_rfc3339("2023-03-01T09:00:00Z").expect("valid constant");
    let mut lib = SoundLibrary::new(emb.dimension());
    let mut clock = 0i64;
    for id in 1..=params.sounds {
        let count = if multi.contains(&id) { rng.random_range(2..=4) } else { 1 };
        let mut who: Vec<u32> = (1..=labelers).collect();
        who.shuffle(&mut rng);
        let mut labels = Vec::with_capacity(count);
        for labeler in who.into_iter().take(count) {
            let text = *LABEL_VOCABULARY.choose(&mut rng).expect("non-empty vocabulary");
            let embedding = match cache.get(text) {
                Some(e) => e.clone(),
                None => {
                    let e = emb.embed(text)?;
                    cache.insert(text, e.clone());
                    e
                }
            };
            clock += rng.random_range(10_000..600_000);
            labels.push(EmotionLabel {
                text: text.to_string(),
                labeler_id: format!("labeler-{labeler:02}"),
                created_at: Timestamp(base.as_millis() + clock),
                embedding,
            });
        }
        let duration_s = (rng.random_range(200..1800) as f64) / 10.0;
        lib.insert_sound(SoundAsset { sound_id: id, file_ref: format!("sounds/{id:04}.wav"), duration_s, labels })?;
    }
    Ok(lib)
}
