//! Fixture-set directories.
//!
//! A fixture set holds one JSON file per layer plus one for the weather. A file
//! belongs to a source by its first dot-separated name segment, so both
//! `nature.json` and `nature.co2_36mo.json` are the nature fixture. Two files
//! claiming the same source are an error rather than last-write-wins.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{parse_payload, parse_weather, DataSnapshot, IngestError, Provenance, WeatherReading};
use crate::layers::LayerId;
use crate::time::Timestamp;

pub const WEATHER_FIXTURE: &str = "weather";

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureSet {
    pub snapshots: BTreeMap<LayerId, DataSnapshot>,
    pub weather: WeatherReading,
}

/// Canonical file name for a layer fixture.
pub fn fixture_file_name(layer: LayerId) -> String {
    format!("{}.json", layer.name())
}

fn expected_names() -> impl Iterator<Item = &'static str> {
    LayerId::ALL.into_iter().map(LayerId::name).chain([WEATHER_FIXTURE])
}

pub(super) fn scan_fixture_dir(dir: &Path) -> Result<BTreeMap<String, PathBuf>, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|e| IngestError::MissingFixture(format!("{}: {e}", dir.display())))?;
    let mut claimed: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| IngestError::MissingFixture(format!("{}: {e}", dir.display())))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(file_name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let lower = file_name.to_ascii_lowercase();
        if !lower.ends_with(".json") {
            continue;
        }
        let head = lower.split('.').next().unwrap_or_default();
        if let Some(name) = expected_names().find(|n| *n == head) {
            claimed.entry(name.to_string()).or_default().push(path);
        }
    }

    if let Some((name, paths)) = claimed.iter().find(|(_, p)| p.len() > 1) {
        let mut files: Vec<String> =
            paths.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
        files.sort();
        return Err(IngestError::DuplicateFixture { name: name.clone(), files });
    }
    let missing: Vec<&str> = expected_names().filter(|n| !claimed.contains_key(*n)).collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingFixture(missing.join(",")));
    }
    Ok(claimed.into_iter().map(|(k, mut v)| (k, v.remove(0))).collect())
}

/// Loads a complete fixture set. All snapshots carry `fetched_at`.
pub fn load_fixture_set(dir: impl AsRef<Path>, fetched_at: Timestamp) -> Result<FixtureSet, IngestError> {
    let files = scan_fixture_dir(dir.as_ref())?;
    let read = |name: &str, kind| {
        std::fs::read_to_string(&files[name])
            .map_err(|e| IngestError::SourceUnavailable { kind, detail: format!("{}: {e}", files[name].display()) })
    };

    let mut snapshots = BTreeMap::new();
    for layer in LayerId::ALL {
        let kind = layer.source_kind();
        let raw = read(layer.name(), kind)?;
        let payload = parse_payload(kind, &raw)?;
        snapshots
            .insert(layer, DataSnapshot { layer_id: layer, raw, payload, fetched_at, provenance: Provenance::Fixture });
    }
    let weather = parse_weather(&read(WEATHER_FIXTURE, crate::layers::SourceKind::Weather)?, fetched_at)?;
    Ok(FixtureSet { snapshots, weather })
}
