//! Session protocol `pv1`: JSON text frames tagged by `type`.
//!
//! Client → server:
//!
//! | type             | fields                                              |
//! |------------------|-----------------------------------------------------|
//! | `hello`          | `protocol_version` (string, must be `"pv1"`)        |
//! | `pointer_update` | `hand_id` (0 or 1), `x`, `y` (normalized, clamped), `client_time` (optional, seconds) |
//!
//! Server → client:
//!
//! | type             | fields                                              |
//! |------------------|-----------------------------------------------------|
//! | `state_snapshot` | full scene, see [`StateSnapshot`]                   |
//! | `note_event`     | the fields of one event-log entry                   |
//! | `trail_update`   | `hand_id`, `t_ms`, `points` (`x`, `y`, `age_s`, `alpha`) newest first |
//! | `error`          | `code`, `detail`                                    |
//!
//! Unknown fields are ignored. No client message can change tempo, key,
//! cadence or layer pace.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::interaction::StringModel;
use crate::layers::LayerId;
use crate::music::{Mode, MusicalAttribute, SoundEvent};

pub const PROTOCOL_VERSION: &str = "pv1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        protocol_version: String,
    },
    PointerUpdate {
        hand_id: u8,
        x: f64,
        y: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_time: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClientMessageKind {
    Hello,
    PointerUpdate,
}

impl ClientMessageKind {
    pub const ALL: [ClientMessageKind; 2] = [ClientMessageKind::Hello, ClientMessageKind::PointerUpdate];

    /// Wire tag and the complete field list of the variant.
    pub fn grammar(self) -> (&'static str, &'static [&'static str]) {
        match self {
            ClientMessageKind::Hello => ("hello", &["protocol_version"]),
            ClientMessageKind::PointerUpdate => ("pointer_update", &["hand_id", "x", "y", "client_time"]),
        }
    }

    /// A fully populated instance of the variant.
    pub fn example(self) -> ClientMessage {
        match self {
            ClientMessageKind::Hello => ClientMessage::Hello { protocol_version: PROTOCOL_VERSION.into() },
            ClientMessageKind::PointerUpdate => {
                ClientMessage::PointerUpdate { hand_id: 0, x: 0.5, y: 0.5, client_time: Some(0.0) }
            }
        }
    }
}

impl ClientMessage {
    pub fn kind(&self) -> ClientMessageKind {
        match self {
            ClientMessage::Hello { .. } => ClientMessageKind::Hello,
            ClientMessage::PointerUpdate { .. } => ClientMessageKind::PointerUpdate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerView {
    pub layer: LayerId,
    pub pace_rank: u8,
    pub attribute: MusicalAttribute,
    pub sentence: String,
    pub labels: Vec<String>,
    pub activity: f64,
    pub matched_sound_ids: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandView {
    pub hand_id: u8,
    pub visible: bool,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

/// Everything a client needs to draw the scene. `render_hash` covers every
/// field except `tick`, `t_ms` and itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub protocol_version: String,
    pub tick: u64,
    pub t_ms: i64,
    pub key: u8,
    pub key_name: String,
    pub mode: Mode,
    pub tempo_bpm: f64,
    pub strings: Vec<StringModel>,
    pub layers: Vec<LayerView>,
    pub hands: Vec<HandView>,
    pub render_hash: String,
}

impl StateSnapshot {
    pub fn compute_render_hash(&self) -> String {
        let scene = serde_json::json!({
            "protocol_version": self.protocol_version,
            "key": self.key,
            "key_name": self.key_name,
            "mode": self.mode,
            "tempo_bpm": self.tempo_bpm,
            "strings": self.strings,
            "layers": self.layers,
            "hands": self.hands,
        });
        hex::encode(Sha256::digest(scene.to_string().as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrailPointView {
    pub x: f64,
    pub y: f64,
    pub age_s: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    StateSnapshot(StateSnapshot),
    NoteEvent(SoundEvent),
    TrailUpdate { hand_id: u8, t_ms: i64, points: Vec<TrailPointView> },
    Error { code: String, detail: String },
}

impl ServerMessage {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        ServerMessage::Error { code: code.into(), detail: detail.into() }
    }

    pub fn to_frame(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// The error is the reply to send back.
#[allow(clippy::result_large_err)]
pub fn parse_client_frame(text: &str) -> Result<ClientMessage, ServerMessage> {
    serde_json::from_str(text).map_err(|e| ServerMessage::error("bad_frame", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Words that would indicate a client could steer the system's pace.
    const PACE_TERMS: [&str; 11] =
        ["tempo", "bpm", "key", "cadence", "pace", "period", "speed", "rate", "scale", "mode", "seed"];

    #[test]
    fn grammar_has_no_pace_mutating_variant() {
        for kind in ClientMessageKind::ALL {
            let example = kind.example();
            assert_eq!(example.kind(), kind);
            let value = serde_json::to_value(&example).unwrap();
            let obj = value.as_object().unwrap();
            let (tag, fields) = kind.grammar();
            assert_eq!(obj["type"], tag);
            let mut wire: Vec<&str> = obj.keys().map(String::as_str).filter(|k| *k != "type").collect();
            wire.sort();
            let mut declared = fields.to_vec();
            declared.sort();
            assert_eq!(wire, declared, "grammar table out of date for {tag}");
            for name in std::iter::once(tag).chain(fields.iter().copied()) {
                for term in PACE_TERMS {
                    assert!(
                        !name.split('_').any(|part| part == term),
                        "client message `{tag}` exposes pace-related field `{name}`"
                    );
                }
            }
        }
    }

    #[test]
    fn unknown_fields_ignored() {
        let m = parse_client_frame(r#"{"type":"pointer_update","hand_id":1,"x":0.1,"y":0.2,"pressure":3}"#).unwrap();
        assert_eq!(m, ClientMessage::PointerUpdate { hand_id: 1, x: 0.1, y: 0.2, client_time: None });
    }

    #[test]
    fn pace_requests_are_not_messages() {
        for frame in [
            r#"{"type":"set_tempo","tempo_bpm":120}"#,
            r#"{"type":"set_key","key":3}"#,
            r#"{"type":"set_time_scale","factor":100}"#,
            r#"{"type":"set_cadence","layer":"nature","period":1}"#,
            "not json",
        ] {
            let err = parse_client_frame(frame).unwrap_err();
            assert!(matches!(err, ServerMessage::Error { ref code, .. } if code == "bad_frame"));
        }
    }

    #[test]
    fn note_event_frame_shape() {
        let ev = crate::music::on_pluck(2, crate::time::Timestamp(10), 1).unwrap();
        let frame = ServerMessage::NoteEvent(ev.clone()).to_frame();
        assert!(frame.starts_with(r#"{"type":"note_event","onset_ms":10,"kind":"note_pluck""#));
        let back: ServerMessage = serde_json::from_str(&frame).unwrap();
        assert_eq!(back, ServerMessage::NoteEvent(ev));
    }
}
