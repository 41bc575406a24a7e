//! Sound events and the canonical newline-delimited JSON event log.

use serde::{Deserialize, Serialize};

use crate::layers::LayerId;
use crate::time::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A hand crossing a string. Always pitched, never tied to a sound.
    NotePluck,
    /// A layer voice playing one of its matched sounds, pitched or not.
    LayerSound,
}

/// One entry of the event log. Field order here is the serialized order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundEvent {
    #[serde(rename = "onset_ms")]
    pub onset: Timestamp,
    pub kind: EventKind,
    #[serde(rename = "layer")]
    pub layer_id: Option<LayerId>,
    pub sound_id: Option<u32>,
    /// MIDI note number.
    pub pitch: Option<u8>,
    pub velocity: f64,
    pub duration_ms: u32,
    #[serde(rename = "string")]
    pub string_index: Option<u8>,
    #[serde(rename = "hand")]
    pub hand_id: Option<u8>,
}

impl SoundEvent {
    pub fn is_pluck(&self) -> bool {
        self.kind == EventKind::NotePluck
    }
}

pub fn serialize_event_log(events: &[SoundEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("sound events always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<Vec<SoundEvent>, serde_json::Error> {
    text.lines().filter(|l| !l.is_empty()).map(serde_json::from_str).collect()
}

/// Byte equality of two serialized logs.
pub fn replay_check(log_a: &[u8], log_b: &[u8]) -> bool {
    log_a == log_b
}
