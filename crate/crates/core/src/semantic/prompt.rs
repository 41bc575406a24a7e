//! Versioned prompt templates and the payload flattening fed into them.

use super::SemanticError;
use crate::ingestion::{DataSnapshot, Payload};
use crate::layers::SourceKind;

pub const PROMPT_VERSION: &str = "v1";
pub const PROMPT_CHAR_LIMIT: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub text: &'static str,
}

impl PromptTemplate {
    pub const EXPLAIN_DATA: PromptTemplate =
        PromptTemplate { name: "explain_data", text: include_str!("../../prompts/v1/explain_data.txt") };
    pub const EMOTION_LABELS: PromptTemplate =
        PromptTemplate { name: "emotion_labels", text: include_str!("../../prompts/v1/emotion_labels.txt") };
    pub const EMOTION_LABELS_STRICT: PromptTemplate = PromptTemplate {
        name: "emotion_labels_strict",
        text: include_str!("../../prompts/v1/emotion_labels_strict.txt"),
    };

    /// Substitutes `{{name}}` placeholders. Every placeholder in the template
    /// must be supplied.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, SemanticError> {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            let close = after.find("}}").ok_or_else(|| SemanticError::MissingPlaceholder {
                template: self.name.into(),
                placeholder: after.chars().take(20).collect(),
            })?;
            let key = &after[..close];
            let value = values.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| {
                SemanticError::MissingPlaceholder { template: self.name.into(), placeholder: key.into() }
            })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn source_name(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::SocialFeed => "recent posts",
        SourceKind::EconomyIndicators => "economy and growth indicators",
        SourceKind::InfrastructureIndicators => "infrastructure indicators",
        SourceKind::PublicSectorIndicators => "public sector indicators",
        SourceKind::WikipediaMostRead => "most read articles of the day",
        SourceKind::Co2Series => "atmospheric CO2 concentration",
        SourceKind::Weather => "weather",
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Which end of the entry list gets dropped first when over the limit.
enum Truncate {
    /// Chronological, drop oldest (front) first.
    Oldest,
    /// Ranked, drop lowest-ranked (back) first.
    Lowest,
}

/// Flattens a snapshot into `key: value` lines under a source header,
/// with series entries as `month=value`. Output never exceeds
/// [`PROMPT_CHAR_LIMIT`] characters; entries are dropped oldest (or
/// lowest-ranked) first. Absent optional fields produce no line.
pub fn serialize_payload_for_prompt(snapshot: &DataSnapshot) -> String {
    let kind = snapshot.layer_id.source_kind();
    let mut header = vec![format!("source: {}", source_name(kind))];
    let (entries, truncate): (Vec<String>, Truncate) = match &snapshot.payload {
        Payload::SocialFeed { source, posts } => {
            if let Some(s) = source {
                header.push(format!("feed: {}", one_line(s)));
            }
            let mut posts: Vec<_> = posts.iter().collect();
            posts.sort_by(|a, b| a.posted_at.cmp(&b.posted_at));
            (posts.iter().map(|p| format!("{}: {}", p.posted_at, one_line(&p.text))).collect(), Truncate::Oldest)
        }
        Payload::Indicators { records, .. } => {
            let mut records: Vec<_> = records.iter().filter(|r| r.value.is_some()).collect();
            records.sort_by(|a, b| a.date.cmp(&b.date));
            let lines = records
                .iter()
                .map(|r| format!("{} ({}, {}): {}", r.name, r.country, r.date, r.value.unwrap_or_default()))
                .collect();
            (lines, Truncate::Oldest)
        }
        Payload::MostRead { project, date, articles } => {
            if let Some(p) = project {
                header.push(format!("project: {p}"));
            }
            if let Some(d) = date {
                header.push(format!("date: {d}"));
            }
            let mut articles: Vec<_> = articles.iter().collect();
            articles.sort_by_key(|a| a.rank);
            let lines = articles
                .iter()
                .map(|a| format!("#{} {}: {} views", a.rank, a.article.replace('_', " "), a.views))
                .collect();
            (lines, Truncate::Lowest)
        }
        Payload::Co2 { location, unit, series } => {
            if let Some(l) = location {
                header.push(format!("location: {l}"));
            }
            header.push(format!("unit: {unit}"));
            (series.iter().map(|m| format!("{}={}", m.month, m.ppm)).collect(), Truncate::Oldest)
        }
    };

    let line_cost = |s: &String| s.chars().count() + 1;
    let mut budget = PROMPT_CHAR_LIMIT.saturating_sub(header.iter().map(line_cost).sum());
    let mut kept = 0;
    let ordered: Box<dyn Iterator<Item = &String>> = match truncate {
        Truncate::Oldest => Box::new(entries.iter().rev()),
        Truncate::Lowest => Box::new(entries.iter()),
    };
    for e in ordered {
        let c = line_cost(e);
        if c > budget {
            break;
        }
        budget -= c;
        kept += 1;
    }
    let body = match truncate {
        Truncate::Oldest => &entries[entries.len() - kept..],
        Truncate::Lowest => &entries[..kept],
    };

    let mut out = String::new();
    for line in header.iter().chain(body) {
        out.push_str(line);
        out.push('\n');
    }
    out
}
