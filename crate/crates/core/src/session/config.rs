use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::layers::LayerId;
use crate::semantic::REFERENCE_DIMENSION;

use super::SessionError;

/// Environment variable consulted for the provider credential.
pub const API_KEY_ENV: &str = "SONIFIER_API_KEY";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextGenChoice {
    Stub,
    Openai,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingChoice {
    Hash,
    Openai,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenAiConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_completion_model")]
    pub completion_model: String,
    #[serde(default = "default_embedding_model")]
    pub embedding_model: String,
    /// Never serialized, so it stays out of digests and manifests.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        OpenAiConfig {
            base_url: default_base_url(),
            completion_model: default_completion_model(),
            embedding_model: default_embedding_model(),
            api_key: None,
        }
    }
}

fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}

fn default_completion_model() -> String {
    "gpt-4o-mini".into()
}

fn default_embedding_model() -> String {
    "text-embedding-3-large".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default = "default_textgen")]
    pub textgen: TextGenChoice,
    #[serde(default = "default_embedding")]
    pub embedding: EmbeddingChoice,
    #[serde(default = "default_dimension")]
    pub embedding_dimension: usize,
    /// Seed of the offline embedder. Library files are only valid for the
    /// embedder that produced them.
    #[serde(default)]
    pub embedding_seed: u64,
    #[serde(default)]
    pub openai: OpenAiConfig,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            textgen: default_textgen(),
            embedding: default_embedding(),
            embedding_dimension: default_dimension(),
            embedding_seed: 0,
            openai: OpenAiConfig::default(),
        }
    }
}

fn default_textgen() -> TextGenChoice {
    TextGenChoice::Stub
}

fn default_embedding() -> EmbeddingChoice {
    EmbeddingChoice::Hash
}

fn default_dimension() -> usize {
    REFERENCE_DIMENSION
}

/// Live endpoint override for one source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceOverride {
    pub endpoint: Option<String>,
    pub locale: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default)]
    pub seed: u64,
    /// Replay sources from this directory instead of fetching them.
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
    #[serde(default)]
    pub providers: ProviderConfig,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_time_scale")]
    pub time_scale_factor: f64,
    #[serde(default)]
    pub headless: bool,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default = "default_match_k")]
    pub match_k: usize,
    /// Sound library in JSONL. When absent a synthetic library is generated.
    #[serde(default)]
    pub library: Option<PathBuf>,
    #[serde(default = "default_library_sounds")]
    pub library_sounds: u32,
    /// Logical start time of headless runs.
    #[serde(default = "default_start_time")]
    pub start_time: String,
    /// Minimum length of a headless run in seconds.
    #[serde(default = "default_min_duration")]
    pub min_duration_s: f64,
    /// Keyed by layer name or `weather`.
    #[serde(default)]
    pub sources: BTreeMap<String, SourceOverride>,
}

fn default_port() -> u16 {
    8080
}

fn default_time_scale() -> f64 {
    1.0
}

fn default_match_k() -> usize {
    3
}

fn default_library_sounds() -> u32 {
    1050
}

fn default_start_time() -> String {
    "2023-06-01T00:00:00Z".into()
}

fn default_min_duration() -> f64 {
    64.0
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            fixtures_dir: None,
            providers: ProviderConfig::default(),
            port: default_port(),
            time_scale_factor: default_time_scale(),
            headless: false,
            script: None,
            match_k: default_match_k(),
            library: None,
            library_sounds: default_library_sounds(),
            start_time: default_start_time(),
            min_duration_s: default_min_duration(),
            sources: BTreeMap::new(),
        }
    }
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, SessionError> {
        toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| SessionError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut config.fixtures_dir, &mut config.script, &mut config.library].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    /// Only credentials come from the environment.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(key) = get(API_KEY_ENV).filter(|k| !k.is_empty()) {
            self.providers.openai.api_key = Some(key);
        }
    }

    pub fn uses_live_providers(&self) -> bool {
        self.providers.textgen == TextGenChoice::Openai || self.providers.embedding == EmbeddingChoice::Openai
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::Config(m.into()));
        if !(self.time_scale_factor.is_finite() && self.time_scale_factor > 0.0) {
            return bad("time_scale_factor must be positive and finite");
        }
        if self.match_k == 0 {
            return bad("match_k must be at least 1");
        }
        if self.providers.embedding_dimension == 0 {
            return bad("embedding_dimension must be positive");
        }
        if self.headless && self.fixtures_dir.is_none() {
            return bad("headless runs need fixtures_dir");
        }
        if self.headless && self.script.is_none() {
            return bad("headless runs need a pointer script");
        }
        if self.uses_live_providers() && self.providers.openai.api_key.is_none() {
            return Err(SessionError::Config(format!("live providers need a credential in {API_KEY_ENV}")));
        }
        if !(self.min_duration_s.is_finite() && self.min_duration_s >= 0.0) {
            return bad("min_duration_s must be non-negative");
        }
        for name in self.sources.keys() {
            if name != "weather" && name.parse::<LayerId>().is_err() {
                return Err(SessionError::Config(format!("unknown source `{name}`")));
            }
        }
        if crate::time::Timestamp::parse_rfc3339(&self.start_time).is_none() {
            return bad("start_time must be RFC 3339");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form. Credentials and filesystem
    /// locations are left out so the digest is the same on every checkout.
    pub fn digest(&self) -> String {
        let mut portable = self.clone();
        portable.fixtures_dir = None;
        portable.script = None;
        portable.library = None;
        let json = serde_json::to_string(&portable).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
