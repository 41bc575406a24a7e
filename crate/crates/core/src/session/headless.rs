//! Deterministic runs without a client: pointer input comes from a JSONL
//! script and the clock advances in fixed ticks.
//!
//! Script lines, `t_ms` relative to the session start and non-decreasing:
//!
//! ```text
//! {"t_ms": 1200, "hand_id": 0, "x": 0.5, "y": 0.1}
//! {"t_ms": 5000, "weather": "sunny"}
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingestion::{classify_weather, WeatherReading};
use crate::music::serialize_event_log;
use crate::semantic::PROMPT_VERSION;
use crate::time::Timestamp;

use super::{
    execute, ClientMessage, Outbound, RefreshFailure, Services, Session, SessionConfig, SessionError, WorkResult,
    PROTOCOL_VERSION, TICK_HZ,
};

/// Quiet time after the last scripted input.
const TAIL: Duration = Duration::from_secs(2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEvent {
    Pointer { t_ms: i64, hand_id: u8, x: f64, y: f64 },
    Weather { t_ms: i64, weather: String },
}

impl ScriptEvent {
    pub fn t_ms(&self) -> i64 {
        match self {
            ScriptEvent::Pointer { t_ms, .. } | ScriptEvent::Weather { t_ms, .. } => *t_ms,
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptEvent>, SessionError> {
    let mut events: Vec<ScriptEvent> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |detail: String| SessionError::Script { line: i + 1, detail };
        let event: ScriptEvent = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if event.t_ms() < 0 {
            return Err(err("negative t_ms".into()));
        }
        if events.last().is_some_and(|prev| prev.t_ms() > event.t_ms()) {
            return Err(err("t_ms goes backwards".into()));
        }
        events.push(event);
    }
    Ok(events)
}

/// Written next to the event log; identical runs give identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub protocol_version: String,
    pub prompt_version: String,
    pub seed: u64,
    pub config_digest: String,
    pub textgen_provider: String,
    pub embedding_model: String,
    pub library_sounds: usize,
    pub key: u8,
    pub key_name: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub ticks: u64,
    pub event_count: usize,
    pub event_log_sha256: String,
}

#[derive(Clone, Debug)]
pub struct HeadlessRun {
    /// Canonical NDJSON event log.
    pub log: String,
    pub manifest: RunManifest,
    pub failures: Vec<RefreshFailure>,
    /// Every message the session sent, in order.
    pub outbound: Vec<Outbound>,
}

impl HeadlessRun {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, log_path: &Path, manifest_path: &Path) -> Result<(), SessionError> {
        std::fs::write(log_path, &self.log)?;
        std::fs::write(manifest_path, self.manifest_json())?;
        Ok(())
    }
}

/// Runs the script to completion, or for `min_duration_s` if that is longer.
pub fn run_headless(
    config: &SessionConfig,
    services: Arc<Services>,
    script: &[ScriptEvent],
) -> Result<HeadlessRun, SessionError> {
    let start = Timestamp::parse_rfc3339(&config.start_time)
        .ok_or_else(|| SessionError::Config("start_time must be RFC 3339".into()))?;
    let mut session = Session::start(config, Arc::clone(&services), start)?;

    let script_end = script.last().map_or(0, |e| e.t_ms() + TAIL.as_millis() as i64);
    let end_ms = script_end.max((config.min_duration_s * 1000.0).round() as i64);
    let mut outbound = Vec::new();
    let mut pending = script.iter().peekable();
    let mut k: i64 = 0;
    loop {
        let offset = k * 1000 / TICK_HZ as i64;
        if offset > end_ms {
            break;
        }
        let t = Timestamp(start.as_millis() + offset);
        outbound.extend(session.advance(t)?);
        loop {
            let work = session.due_work();
            if work.is_empty() {
                break;
            }
            for w in work {
                let result = execute(&services, &w);
                outbound.extend(session.apply(result));
            }
        }
        while let Some(event) = pending.next_if(|e| e.t_ms() <= offset) {
            match event {
                ScriptEvent::Pointer { hand_id, x, y, .. } => {
                    let msg = ClientMessage::PointerUpdate { hand_id: *hand_id, x: *x, y: *y, client_time: None };
                    outbound.extend(session.handle_message(msg));
                }
                ScriptEvent::Weather { weather, .. } => {
                    let reading = WeatherReading { condition: classify_weather(weather), fetched_at: t };
                    outbound.extend(session.apply(WorkResult::Weather(Ok(reading))));
                }
            }
        }
        k += 1;
    }

    let log = serialize_event_log(session.event_log());
    let state = session.composition();
    let manifest = RunManifest {
        protocol_version: PROTOCOL_VERSION.into(),
        prompt_version: PROMPT_VERSION.into(),
        seed: config.seed,
        config_digest: config.digest(),
        textgen_provider: services.textgen.provider_id().into(),
        embedding_model: services.embedder.model_id().into(),
        library_sounds: services.library.len(),
        key: state.global_key().value(),
        key_name: state.global_key().name().into(),
        start_ms: start.as_millis(),
        end_ms: session.now().as_millis(),
        ticks: session.tick(),
        event_count: session.event_log().len(),
        event_log_sha256: hex::encode(Sha256::digest(log.as_bytes())),
    };
    Ok(HeadlessRun { log, manifest, failures: session.failures().to_vec(), outbound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_parsing() {
        let s = "{\"t_ms\":0,\"hand_id\":1,\"x\":0.5,\"y\":0.1}\n\n{\"t_ms\":10,\"weather\":\"light rain\"}\n";
        let events = parse_script(s).unwrap();
        assert_eq!(events[0], ScriptEvent::Pointer { t_ms: 0, hand_id: 1, x: 0.5, y: 0.1 });
        assert_eq!(events[1], ScriptEvent::Weather { t_ms: 10, weather: "light rain".into() });
    }

    #[test]
    fn script_errors_name_the_line() {
        let s = "{\"t_ms\":10,\"weather\":\"sunny\"}\n{\"t_ms\":5,\"weather\":\"sunny\"}";
        assert!(matches!(parse_script(s), Err(SessionError::Script { line: 2, .. })));
        assert!(matches!(parse_script("{\"t_ms\":1}"), Err(SessionError::Script { line: 1, .. })));
    }
}
