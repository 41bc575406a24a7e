//! Extraction of exactly three emotion labels from free-form model output.

use std::sync::LazyLock;

use regex::Regex;

use super::SemanticError;

pub const MAX_LABEL_WORDS: usize = 6;

static PREAMBLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^:\n]{1,60}:\s*(\S[\s\S]*)$").unwrap());
static ENUMERATED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\s)\(?\d{1,2}[.):]\s*").unwrap());

const TRIM: &[char] =
    &['"', '\'', '`', '“', '”', '‘', '’', '[', ']', '(', ')', '{', '}', '*', '-', '•', '.', '!', '?', ':', ';', ','];

/// Lowercases, strips list markers and surrounding punctuation, and
/// collapses inner whitespace. Returns an empty string if nothing is left.
pub fn normalize_label(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let mut s = lower.trim().trim_matches(|c: char| c.is_whitespace() || TRIM.contains(&c));
    if let Some(rest) = s.strip_prefix("and ") {
        s = rest;
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn split_items(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();

    if ENUMERATED.find_iter(text).count() >= 2 {
        return ENUMERATED.split(text).map(str::to_string).collect();
    }
    if lines.len() >= 2 {
        return lines.into_iter().map(str::to_string).collect();
    }
    let mut items: Vec<String> = text.split([',', ';', '|', '/', '•']).map(str::to_string).collect();
    if items.len() == 2 {
        if let Some((a, b)) = items[1].split_once(" and ") {
            let (a, b) = (a.to_string(), b.to_string());
            items.truncate(1);
            items.extend([a, b]);
        }
    }
    if items.len() == 1 {
        let words: Vec<&str> = items[0].split_whitespace().collect();
        if words.len() == 3 {
            return words.into_iter().map(str::to_string).collect();
        }
    }
    items
}

/// Parses `calm, rising, heavy`, numbered lists, bullet lists and similar
/// shapes into three normalized labels.
pub fn parse_labels(text: &str) -> Result<[String; 3], SemanticError> {
    let mut body = text.trim();
    if let Some(c) = PREAMBLE.captures(body) {
        let head = &body[..c.get(1).unwrap().start()];
        if !ENUMERATED.is_match(head) {
            body = c.get(1).unwrap().as_str();
        }
    }
    let labels: Vec<String> = split_items(body).iter().map(|s| normalize_label(s)).filter(|s| !s.is_empty()).collect();
    if labels.len() != 3 {
        return Err(SemanticError::LabelParse(format!("found {} labels in {text:?}", labels.len())));
    }
    if let Some(long) = labels.iter().find(|l| l.split_whitespace().count() > MAX_LABEL_WORDS) {
        return Err(SemanticError::LabelParse(format!("label {long:?} exceeds {MAX_LABEL_WORDS} words")));
    }
    Ok([labels[0].clone(), labels[1].clone(), labels[2].clone()])
}
