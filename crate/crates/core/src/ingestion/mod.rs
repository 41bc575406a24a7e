//! Data stream ingestion: fetchers, fixture replay, refresh scheduling and
//! the last-good snapshot store.

mod fixtures;
mod payload;
mod schedule;
mod store;
mod weather;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::{DataSourceDescriptor, LayerId, PaceLayer, SourceKind};
use crate::time::Timestamp;

pub use fixtures::{fixture_file_name, load_fixture_set, FixtureSet, WEATHER_FIXTURE};
pub use payload::{parse_payload, Co2Month, IndicatorRecord, MostReadArticle, Payload, Post};
pub use schedule::{build_schedule, RefreshTarget, ScheduleEntry, SchedulePlan, TimeScale};
pub use store::SnapshotStore;
pub use weather::{classify_weather, parse_weather, WeatherCondition, WeatherReading};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("source {kind:?} unavailable: {detail}")]
    SourceUnavailable { kind: SourceKind, detail: String },
    #[error("{kind:?} payload does not match its schema: {detail}")]
    SchemaMismatch { kind: SourceKind, detail: String },
    #[error("missing fixture `{0}`")]
    MissingFixture(String),
    #[error("more than one fixture file for `{name}`: {files:?}")]
    DuplicateFixture { name: String, files: Vec<String> },
    #[error("fetcher is not configured for {0:?}")]
    UnsupportedSource(SourceKind),
    #[error("time scale factor must be positive and finite, got {0}")]
    InvalidTimeScale(f64),
    #[error("schedule requires all six layers, missing {0:?}")]
    IncompleteLayers(Vec<LayerId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Live,
    Fixture,
}

/// One fetched data stream. `raw` is the source body exactly as received;
/// `payload` is the parsed view of it.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSnapshot {
    pub layer_id: LayerId,
    pub raw: String,
    pub payload: Payload,
    pub fetched_at: Timestamp,
    pub provenance: Provenance,
}

/// Retrieves raw source bodies. Implementations are either live HTTP clients
/// or fixture readers.
pub trait DataFetcher: Send + Sync {
    fn provenance(&self) -> Provenance;

    fn supports(&self, kind: SourceKind) -> bool;

    fn fetch_raw(&self, source: &DataSourceDescriptor) -> Result<String, IngestError>;
}

pub fn fetch_snapshot(
    layer: &PaceLayer,
    fetcher: &dyn DataFetcher,
    now: Timestamp,
) -> Result<DataSnapshot, IngestError> {
    let kind = layer.source.kind;
    if !fetcher.supports(kind) {
        return Err(IngestError::UnsupportedSource(kind));
    }
    let raw = fetcher.fetch_raw(&layer.source)?;
    let payload = parse_payload(kind, &raw)?;
    Ok(DataSnapshot { layer_id: layer.id, raw, payload, fetched_at: now, provenance: fetcher.provenance() })
}

pub fn fetch_weather(
    source: &DataSourceDescriptor,
    fetcher: &dyn DataFetcher,
    now: Timestamp,
) -> Result<WeatherReading, IngestError> {
    if !fetcher.supports(SourceKind::Weather) {
        return Err(IngestError::UnsupportedSource(SourceKind::Weather));
    }
    let raw = fetcher.fetch_raw(source)?;
    parse_weather(&raw, now)
}

/// Replays source bodies from files on disk.
#[derive(Clone, Debug, Default)]
pub struct FixtureFetcher {
    files: HashMap<SourceKind, PathBuf>,
}

impl FixtureFetcher {
    pub fn new() -> Self {
        FixtureFetcher::default()
    }

    pub fn with_file(mut self, kind: SourceKind, path: impl Into<PathBuf>) -> Self {
        self.files.insert(kind, path.into());
        self
    }

    /// Maps every fixture in a fixture-set directory. Fails on missing or
    /// duplicate files exactly like [`load_fixture_set`].
    pub fn from_dir(dir: impl AsRef<std::path::Path>) -> Result<Self, IngestError> {
        let files = fixtures::scan_fixture_dir(dir.as_ref())?;
        let mut fetcher = FixtureFetcher::new();
        for (name, path) in files {
            let kind = if name == WEATHER_FIXTURE {
                SourceKind::Weather
            } else {
                name.parse::<LayerId>().map_err(|_| IngestError::MissingFixture(name.clone()))?.source_kind()
            };
            fetcher.files.insert(kind, path);
        }
        Ok(fetcher)
    }
}

impl DataFetcher for FixtureFetcher {
    fn provenance(&self) -> Provenance {
        Provenance::Fixture
    }

    fn supports(&self, kind: SourceKind) -> bool {
        self.files.contains_key(&kind)
    }

    fn fetch_raw(&self, source: &DataSourceDescriptor) -> Result<String, IngestError> {
        let path = self.files.get(&source.kind).ok_or(IngestError::UnsupportedSource(source.kind))?;
        std::fs::read_to_string(path).map_err(|e| IngestError::SourceUnavailable {
            kind: source.kind,
            detail: format!("{}: {e}", path.display()),
        })
    }
}
