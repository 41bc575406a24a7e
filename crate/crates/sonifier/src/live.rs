//! Network adapters: source fetching over HTTP and OpenAI-compatible
//! completion and embedding endpoints. All calls are blocking; the server runs
//! them off its session loop.

use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use reqwest::blocking::Client;
use serde_json::{json, Value};
use sonifier_core::ingestion::{DataFetcher, FixtureFetcher, IngestError, Provenance};
use sonifier_core::layers::{DataSourceDescriptor, SourceKind};
use sonifier_core::semantic::{
    Embedding, EmbeddingProvider, HashEmbedder, ProviderError, StubTextGen, TextGenProvider,
};
use sonifier_core::session::{
    load_library, EmbeddingChoice, OpenAiConfig, Services, SessionConfig, SessionError, TextGenChoice,
};
use sonifier_core::Timestamp;

const USER_AGENT: &str = concat!("sonifier/", env!("CARGO_PKG_VERSION"));
const TIMEOUT: Duration = Duration::from_secs(30);

pub fn wall_clock() -> Timestamp {
    let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64);
    Timestamp(ms)
}

fn client() -> Client {
    Client::builder().user_agent(USER_AGENT).timeout(TIMEOUT).build().expect("TLS backend available")
}

/// Built-in endpoints for sources with a public keyless API.
pub fn default_live_endpoint(kind: SourceKind) -> Option<&'static str> {
    match kind {
        SourceKind::EconomyIndicators => Some(concat!(
            "https://api.worldbank.org/v2/country/AUS/indicator/",
            "NY.GDP.MKTP.KD.ZG;FP.CPI.TOTL.ZG;SL.UEM.TOTL.ZS?source=2&format=json&mrv=3"
        )),
        SourceKind::InfrastructureIndicators => Some(concat!(
            "https://api.worldbank.org/v2/country/AUS/indicator/",
            "EG.ELC.ACCS.ZS;IT.NET.USER.ZS;EG.FEC.RNEW.ZS?source=2&format=json&mrv=3"
        )),
        SourceKind::PublicSectorIndicators => Some(concat!(
            "https://api.worldbank.org/v2/country/AUS/indicator/",
            "GC.XPN.TOTL.GD.ZS;GC.TAX.TOTL.GD.ZS;MS.MIL.XPND.GD.ZS?source=2&format=json&mrv=3"
        )),
        SourceKind::WikipediaMostRead => {
            Some("https://wikimedia.org/api/rest_v1/metrics/pageviews/top/en.wikipedia/all-access/{yyyy}/{mm}/{dd}")
        }
        SourceKind::SocialFeed | SourceKind::Co2Series | SourceKind::Weather => None,
    }
}

/// Fills `{yyyy}`, `{mm}` and `{dd}` with the UTC date of the day before `now`.
pub fn expand_endpoint(template: &str, now: Timestamp) -> String {
    let day = Timestamp(now.as_millis() - 86_400_000).to_string();
    template.replace("{yyyy}", &day[0..4]).replace("{mm}", &day[5..7]).replace("{dd}", &day[8..10])
}

/// Fetches sources over HTTP(S). Endpoints that are not URLs fall back to the
/// built-in defaults.
pub struct HttpFetcher {
    client: Client,
}

impl HttpFetcher {
    pub fn new() -> Self {
        HttpFetcher { client: client() }
    }

    fn url_for(source: &DataSourceDescriptor) -> Result<String, IngestError> {
        let template = if source.endpoint.starts_with("http://") || source.endpoint.starts_with("https://") {
            source.endpoint.as_str()
        } else {
            default_live_endpoint(source.kind).ok_or_else(|| IngestError::SourceUnavailable {
                kind: source.kind,
                detail: "no endpoint configured".into(),
            })?
        };
        Ok(expand_endpoint(template, wall_clock()))
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new()
    }
}

impl DataFetcher for HttpFetcher {
    fn provenance(&self) -> Provenance {
        Provenance::Live
    }

    fn supports(&self, _: SourceKind) -> bool {
        true
    }

    fn fetch_raw(&self, source: &DataSourceDescriptor) -> Result<String, IngestError> {
        let url = Self::url_for(source)?;
        let unavailable = |detail: String| IngestError::SourceUnavailable { kind: source.kind, detail };
        let resp = self.client.get(&url).send().map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(unavailable(format!("{url}: HTTP {status}")));
        }
        resp.text().map_err(|e| unavailable(e.to_string()))
    }
}

fn post_json(
    client: &Client,
    cfg: &OpenAiConfig,
    provider: &str,
    path: &str,
    body: Value,
) -> Result<Value, ProviderError> {
    let key = cfg.api_key.as_deref().ok_or_else(|| ProviderError::new(provider, "missing credential"))?;
    let url = format!("{}/{path}", cfg.base_url.trim_end_matches('/'));
    let resp = client
        .post(&url)
        .bearer_auth(key)
        .json(&body)
        .send()
        .map_err(|e| ProviderError::new(provider, e.to_string()))?;
    let status = resp.status();
    let value: Value = resp.json().map_err(|e| ProviderError::new(provider, e.to_string()))?;
    if !status.is_success() {
        let msg = value["error"]["message"].as_str().unwrap_or("request failed");
        return Err(ProviderError::new(provider, format!("HTTP {status}: {msg}")));
    }
    Ok(value)
}

pub struct OpenAiTextGen {
    client: Client,
    cfg: OpenAiConfig,
    id: String,
}

impl OpenAiTextGen {
    pub fn new(cfg: OpenAiConfig) -> Self {
        let id = format!("openai:{}", cfg.completion_model);
        OpenAiTextGen { client: client(), cfg, id }
    }
}

impl TextGenProvider for OpenAiTextGen {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.cfg.completion_model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let v = post_json(&self.client, &self.cfg, &self.id, "chat/completions", body)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::new(&self.id, "response without message content"))
    }
}

pub struct OpenAiEmbedder {
    client: Client,
    cfg: OpenAiConfig,
    dimension: usize,
    id: String,
}

impl OpenAiEmbedder {
    pub fn new(cfg: OpenAiConfig, dimension: usize) -> Self {
        let id = format!("openai:{}:d{dimension}", cfg.embedding_model);
        OpenAiEmbedder { client: client(), cfg, dimension, id }
    }
}

impl EmbeddingProvider for OpenAiEmbedder {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding, ProviderError> {
        let body = json!({ "model": self.cfg.embedding_model, "input": text, "dimensions": self.dimension });
        let v = post_json(&self.client, &self.cfg, &self.id, "embeddings", body)?;
        let values: Vec<f64> = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::new(&self.id, "response without embedding"))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        if values.len() != self.dimension {
            return Err(ProviderError::new(&self.id, format!("got {} dimensions", values.len())));
        }
        Ok(Embedding::new(values, self.id.clone()))
    }
}

pub fn build_embedder(config: &SessionConfig) -> Box<dyn EmbeddingProvider> {
    let p = &config.providers;
    match p.embedding {
        EmbeddingChoice::Hash => Box::new(HashEmbedder::new(p.embedding_dimension, p.embedding_seed)),
        EmbeddingChoice::Openai => Box::new(OpenAiEmbedder::new(p.openai.clone(), p.embedding_dimension)),
    }
}

pub fn build_textgen(config: &SessionConfig) -> Box<dyn TextGenProvider> {
    match config.providers.textgen {
        TextGenChoice::Stub => Box::new(StubTextGen::new(config.seed)),
        TextGenChoice::Openai => Box::new(OpenAiTextGen::new(config.providers.openai.clone())),
    }
}

/// Fixture replay when a fixture directory is configured, HTTP otherwise.
pub fn build_fetcher(config: &SessionConfig) -> Result<Box<dyn DataFetcher>, SessionError> {
    Ok(match &config.fixtures_dir {
        Some(dir) => Box::new(FixtureFetcher::from_dir(dir)?),
        None => Box::new(HttpFetcher::new()),
    })
}

pub fn build_services(config: &SessionConfig) -> Result<Arc<Services>, SessionError> {
    let embedder = build_embedder(config);
    let library = load_library(config, &*embedder)?;
    let services = Services::new(build_fetcher(config)?, build_textgen(config), embedder, library, config.match_k)?;
    Ok(Arc::new(services))
}
