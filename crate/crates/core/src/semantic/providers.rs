//! Provider interfaces plus the deterministic offline implementations used
//! by fixture runs and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Embedding, SemanticError};
use crate::layers::LayerId;

/// Embedding width of the reference deployment.
pub const REFERENCE_DIMENSION: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{provider}: {message}")]
pub struct ProviderError {
    pub provider: String,
    pub message: String,
}

impl ProviderError {
    pub fn new(provider: impl Into<String>, message: impl Into<String>) -> Self {
        ProviderError { provider: provider.into(), message: message.into() }
    }
}

pub trait TextGenProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn generate(&self, prompt: &str) -> Result<String, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding, ProviderError>;
}

pub const RETRIES: u32 = 1;

/// Runs `call` once plus [`RETRIES`] more times before giving up.
pub fn with_retry<T>(mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, SemanticError> {
    let mut last = None;
    for _ in 0..=RETRIES {
        match call() {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(SemanticError::GenerationFailed {
        attempts: RETRIES + 1,
        detail: last.map(|e| e.to_string()).unwrap_or_default(),
    })
}

fn seeded_hash(seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Offline text generator. Sentences are templated from a digest of the
/// prompt's data block, labels come from a fixed per-layer table.
#[derive(Clone, Debug)]
pub struct StubTextGen {
    seed: u64,
}

impl StubTextGen {
    pub fn new(seed: u64) -> Self {
        StubTextGen { seed }
    }

    pub fn labels_for(layer: LayerId) -> [&'static str; 3] {
        match layer {
            LayerId::SocialMedia => ["restless", "playful", "fleeting chatter"],
            LayerId::Commerce => ["steady", "cautious", "quiet optimism"],
            LayerId::Infrastructure => ["patient", "solid", "slow growth"],
            LayerId::Governance => ["measured", "heavy", "careful order"],
            LayerId::Culture => ["curious", "nostalgic", "warm"],
            LayerId::Nature => ["calm", "rising", "heavy concern"],
        }
    }

    fn image_for(layer: LayerId) -> &'static str {
        match layer {
            LayerId::SocialMedia => "a flock of sparrows changing direction mid-air",
            LayerId::Commerce => "a tide that checks its watch",
            LayerId::Infrastructure => "concrete setting under a patient moon",
            LayerId::Governance => "a committee of old trees deliberating",
            LayerId::Culture => "a library humming a half-remembered tune",
            LayerId::Nature => "a slow breath that never quite exhales",
        }
    }

    fn field<'a>(prompt: &'a str, name: &str) -> Option<&'a str> {
        prompt.lines().find_map(|l| l.strip_prefix(name)).map(str::trim)
    }

    fn layer_of(prompt: &str) -> Option<LayerId> {
        let name = Self::field(prompt, "Layer:")?;
        LayerId::ALL.into_iter().find(|l| l.display_name() == name || l.name() == name)
    }
}

impl TextGenProvider for StubTextGen {
    fn provider_id(&self) -> &str {
        "stub-textgen"
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let err = |m: &str| ProviderError::new("stub-textgen", m);
        let header = prompt.lines().next().unwrap_or_default();
        let layer = Self::layer_of(prompt).ok_or_else(|| err("prompt has no recognizable `Layer:` line"))?;
        if header.starts_with("### explain_data") {
            let data =
                prompt.split_once("\nData:\n").map(|(_, rest)| rest).ok_or_else(|| err("prompt has no data block"))?;
            let entries = data.lines().filter(|l| l.contains('=') || l.contains(": ")).count();
            let digest = hex::encode(&seeded_hash(self.seed, &[data.as_bytes()])[..4]);
            Ok(format!(
                "The {} stream reads like {}: {} entries, fingerprint {}.",
                layer.display_name().to_lowercase(),
                Self::image_for(layer),
                entries,
                digest
            ))
        } else if header.starts_with("### emotion_labels") {
            Ok(Self::labels_for(layer).join(", "))
        } else {
            Err(err("unknown prompt template"))
        }
    }
}

/// Offline embedder. Each token of the lowercased text is hashed with the
/// seed into a ChaCha stream of standard-normal values; a text embeds as the
/// sum of its token vectors divided by `sqrt(n)`, so components keep unit
/// variance and texts sharing words are similar.
#[derive(Clone, Debug)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
    model_id: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        HashEmbedder { dimension, seed, model_id: format!("hash-embedder-d{dimension}-s{seed}") }
    }

    fn token_vector(&self, token: &str, acc: &mut [f64]) {
        let digest = seeded_hash(self.seed, &[token.as_bytes()]);
        let mut rng = ChaCha8Rng::from_seed(digest);
        for slot in acc.iter_mut() {
            let x: f64 = StandardNormal.sample(&mut rng);
            *slot += x;
        }
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding, ProviderError> {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> =
            lower.split(|c: char| !c.is_alphanumeric() && c != '\'').filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() || self.dimension == 0 {
            return Err(ProviderError::new(&self.model_id, format!("nothing to embed in {text:?}")));
        }
        let mut values = vec![0.0; self.dimension];
        for t in &tokens {
            self.token_vector(t, &mut values);
        }
        let scale = (tokens.len() as f64).sqrt();
        values.iter_mut().for_each(|v| *v /= scale);
        Ok(Embedding::new(values, self.model_id.clone()))
    }
}
