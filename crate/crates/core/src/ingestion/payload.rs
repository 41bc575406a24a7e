//! Per-source payload schemas.
//!
//! Indicator layers use the World Bank v2 JSON shape (`[page_meta, records]`),
//! the culture layer uses the Wikimedia "top pageviews" shape, the nature layer
//! a monthly CO2 series and the social layer a generic list of recent posts.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::layers::SourceKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub text: String,
    pub posted_at: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub indicator_id: String,
    pub name: String,
    pub country: String,
    pub date: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MostReadArticle {
    pub article: String,
    pub views: u64,
    pub rank: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Co2Month {
    /// `YYYY-MM`
    pub month: String,
    pub ppm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    SocialFeed {
        source: Option<String>,
        posts: Vec<Post>,
    },
    Indicators {
        kind: SourceKind,
        records: Vec<IndicatorRecord>,
    },
    MostRead {
        project: Option<String>,
        date: Option<String>,
        articles: Vec<MostReadArticle>,
    },
    /// Sorted oldest first.
    Co2 {
        location: Option<String>,
        unit: String,
        series: Vec<Co2Month>,
    },
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::SocialFeed { posts, .. } => posts.len(),
            Payload::Indicators { records, .. } => records.len(),
            Payload::MostRead { articles, .. } => articles.len(),
            Payload::Co2 { series, .. } => series.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_payload(kind: SourceKind, raw: &str) -> Result<Payload, IngestError> {
    let mismatch = |detail: String| IngestError::SchemaMismatch { kind, detail };
    let value: Value = serde_json::from_str(raw).map_err(|e| mismatch(format!("invalid JSON: {e}")))?;
    let payload = match kind {
        SourceKind::SocialFeed => parse_social(&value),
        SourceKind::EconomyIndicators | SourceKind::InfrastructureIndicators | SourceKind::PublicSectorIndicators => {
            parse_indicators(kind, &value)
        }
        SourceKind::WikipediaMostRead => parse_most_read(&value),
        SourceKind::Co2Series => parse_co2(&value),
        SourceKind::Weather => Err("weather is parsed with parse_weather".to_string()),
    }
    .map_err(mismatch)?;
    if payload.is_empty() {
        return Err(mismatch("payload has no entries".into()));
    }
    Ok(payload)
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| format!("missing string field `{key}`"))
}

fn opt_str(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::to_string)
}

fn parse_social(v: &Value) -> Result<Payload, String> {
    let posts = v
        .get("posts")
        .and_then(Value::as_array)
        .ok_or("missing array `posts`")?
        .iter()
        .map(|p| {
            let text = str_field(p, "text")?.trim();
            if text.is_empty() {
                return Err("post with empty text".to_string());
            }
            Ok(Post { text: text.to_string(), posted_at: str_field(p, "posted_at")?.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Payload::SocialFeed { source: opt_str(v, "source"), posts })
}

fn parse_indicators(kind: SourceKind, v: &Value) -> Result<Payload, String> {
    let pages = v.as_array().ok_or("expected a [meta, records] array")?;
    if let Some(msg) = pages.first().and_then(|m| m.get("message")) {
        return Err(format!("source returned an error message: {msg}"));
    }
    let rows = pages.get(1).and_then(Value::as_array).ok_or("missing records array at index 1")?;
    let records = rows
        .iter()
        .map(|r| {
            let indicator = r.get("indicator").ok_or("record without `indicator`")?;
            let country = r.get("country").ok_or("record without `country`")?;
            let value = match r.get("value") {
                None | Some(Value::Null) => None,
                Some(Value::Number(n)) => n.as_f64(),
                Some(other) => return Err(format!("non-numeric value {other}")),
            };
            Ok(IndicatorRecord {
                indicator_id: str_field(indicator, "id")?.to_string(),
                name: str_field(indicator, "value")?.to_string(),
                country: str_field(country, "value")?.to_string(),
                date: str_field(r, "date")?.to_string(),
                value,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Payload::Indicators { kind, records })
}

fn parse_most_read(v: &Value) -> Result<Payload, String> {
    let item = v.get("items").and_then(Value::as_array).and_then(|items| items.first()).ok_or("missing `items[0]`")?;
    let articles = item
        .get("articles")
        .and_then(Value::as_array)
        .ok_or("missing array `items[0].articles`")?
        .iter()
        .map(|a| {
            Ok(MostReadArticle {
                article: str_field(a, "article")?.to_string(),
                views: a.get("views").and_then(Value::as_u64).ok_or("missing `views`")?,
                rank: a
                    .get("rank")
                    .and_then(Value::as_u64)
                    .and_then(|r| u32::try_from(r).ok())
                    .ok_or("missing `rank`")?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let date = match (opt_str(item, "year"), opt_str(item, "month"), opt_str(item, "day")) {
        (Some(y), Some(m), Some(d)) => Some(format!("{y}-{m}-{d}")),
        _ => None,
    };
    Ok(Payload::MostRead { project: opt_str(item, "project"), date, articles })
}

fn valid_month(s: &str) -> bool {
    chrono::NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d").is_ok() && s.len() == 7
}

fn parse_co2(v: &Value) -> Result<Payload, String> {
    let mut series = v
        .get("series")
        .and_then(Value::as_array)
        .ok_or("missing array `series`")?
        .iter()
        .map(|e| {
            let month = str_field(e, "month")?;
            if !valid_month(month) {
                return Err(format!("bad month `{month}`, expected YYYY-MM"));
            }
            let ppm = e.get("ppm").and_then(Value::as_f64).ok_or("missing numeric `ppm`")?;
            Ok(Co2Month { month: month.to_string(), ppm })
        })
        .collect::<Result<Vec<_>, String>>()?;
    series.sort_by(|a, b| a.month.cmp(&b.month));
    Ok(Payload::Co2 {
        location: opt_str(v, "location"),
        unit: opt_str(v, "unit").unwrap_or_else(|| "ppm".into()),
        series,
    })
}
