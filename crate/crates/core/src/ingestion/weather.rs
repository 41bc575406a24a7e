use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::layers::SourceKind;
use crate::time::Timestamp;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherCondition {
    Sunny,
    PartlyCloudy,
    Rainy,
    /// Unrecognized condition, raw text preserved.
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherReading {
    pub condition: WeatherCondition,
    pub fetched_at: Timestamp,
}

/// Maps a free-text weather description onto a condition. Case-insensitive;
/// anything unrecognized becomes `Other` with the raw text.
pub fn classify_weather(raw: &str) -> WeatherCondition {
    let lower = raw.trim().to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let has = |pred: &dyn Fn(&str) -> bool| words.iter().any(|w| pred(w));

    let partial = has(&|w| matches!(w, "partly" | "partial" | "partially" | "scattered"));
    let cloudy = has(&|w| w.starts_with("cloud"));
    if partial && (cloudy || has(&|w| w.starts_with("sun"))) {
        return WeatherCondition::PartlyCloudy;
    }
    if has(&|w| w.starts_with("rain") || matches!(w, "drizzle" | "showers" | "shower")) {
        return WeatherCondition::Rainy;
    }
    if has(&|w| matches!(w, "sunny" | "sun" | "clear")) {
        return WeatherCondition::Sunny;
    }
    WeatherCondition::Other(raw.to_string())
}

/// Parses a weather fixture or endpoint body: `{"condition": "..."}` or the
/// common `{"weather": [{"description": "..."}]}` shape.
pub fn parse_weather(raw: &str, fetched_at: Timestamp) -> Result<WeatherReading, IngestError> {
    let mismatch = |detail: &str| IngestError::SchemaMismatch { kind: SourceKind::Weather, detail: detail.into() };
    let v: Value = serde_json::from_str(raw).map_err(|e| mismatch(&format!("invalid JSON: {e}")))?;
    let text = v
        .get("condition")
        .and_then(Value::as_str)
        .or_else(|| {
            v.get("weather")
                .and_then(Value::as_array)
                .and_then(|w| w.first())
                .and_then(|w| w.get("description").or_else(|| w.get("main")))
                .and_then(Value::as_str)
        })
        .ok_or_else(|| mismatch("missing `condition`"))?;
    if text.trim().is_empty() {
        return Err(mismatch("empty condition"));
    }
    Ok(WeatherReading { condition: classify_weather(text), fetched_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_conditions() {
        assert_eq!(classify_weather("sunny"), WeatherCondition::Sunny);
        assert_eq!(classify_weather("rain"), WeatherCondition::Rainy);
        assert_eq!(classify_weather("partly cloudy"), WeatherCondition::PartlyCloudy);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(classify_weather("SUNNY"), WeatherCondition::Sunny);
        assert_eq!(classify_weather("Partly Cloudy"), WeatherCondition::PartlyCloudy);
        assert_eq!(classify_weather("Light rain showers"), WeatherCondition::Rainy);
    }

    #[test]
    fn unknown_passthrough() {
        assert_eq!(classify_weather("volcanic ash"), WeatherCondition::Other("volcanic ash".into()));
    }

    #[test]
    fn openweather_shape() {
        let r = parse_weather(r#"{"weather":[{"main":"Clear","description":"clear sky"}]}"#, Timestamp(5)).unwrap();
        assert_eq!(r.condition, WeatherCondition::Sunny);
        assert!(parse_weather(r#"{"condition":" "}"#, Timestamp(5)).is_err());
    }
}
