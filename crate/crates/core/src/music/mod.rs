//! Rule-based composition: global key, weather-driven mode, per-layer
//! attribute roles and the open-string pluck notes.

mod composer;
mod event;
mod midi;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingestion::{WeatherCondition, WeatherReading};
use crate::layers::LayerId;
use crate::time::Timestamp;

pub use composer::{Composer, CompositionState, LayerVoice, BEATS_PER_BAR, TEMPO_BPM};
pub use event::{parse_event_log, replay_check, serialize_event_log, EventKind, SoundEvent};
pub use midi::write_midi;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MusicError {
    #[error("string index {0} out of range 0..=4")]
    BadStringIndex(u8),
    #[error("invalid composition state: {0}")]
    InvalidState(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MusicalAttribute {
    Accents,
    Bass,
    Timekeepers,
    PadsAndChords,
    Scales,
    Atmospheric,
}

pub fn attribute_for_layer(layer: LayerId) -> MusicalAttribute {
    match layer {
        LayerId::SocialMedia => MusicalAttribute::Accents,
        LayerId::Commerce => MusicalAttribute::Bass,
        LayerId::Infrastructure => MusicalAttribute::Timekeepers,
        LayerId::Governance => MusicalAttribute::PadsAndChords,
        LayerId::Culture => MusicalAttribute::Scales,
        LayerId::Nature => MusicalAttribute::Atmospheric,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Upbeat,
    Neutral,
    Melancholic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Upbeat, Mode::Neutral, Mode::Melancholic];

    /// Semitone offsets from the tonic: major, dorian and natural minor.
    pub fn intervals(self) -> [u8; 7] {
        match self {
            Mode::Upbeat => [0, 2, 4, 5, 7, 9, 11],
            Mode::Neutral => [0, 2, 3, 5, 7, 9, 10],
            Mode::Melancholic => [0, 2, 3, 5, 7, 8, 10],
        }
    }
}

pub fn mode_from_weather(weather: &WeatherReading) -> Mode {
    match weather.condition {
        WeatherCondition::Sunny => Mode::Upbeat,
        WeatherCondition::Rainy => Mode::Melancholic,
        WeatherCondition::PartlyCloudy | WeatherCondition::Other(_) => Mode::Neutral,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);
    pub const D: PitchClass = PitchClass(2);
    pub const E: PitchClass = PitchClass(4);
    pub const F: PitchClass = PitchClass(5);
    pub const G: PitchClass = PitchClass(7);
    pub const A: PitchClass = PitchClass(9);
    pub const B: PitchClass = PitchClass(11);

    const NAMES: [&'static str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

    pub fn new(pc: u8) -> Option<Self> {
        (pc < 12).then_some(PitchClass(pc))
    }

    pub fn of_midi(pitch: u8) -> Self {
        PitchClass(pitch % 12)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: u8) -> Self {
        PitchClass((self.0 + semitones % 12) % 12)
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.0 as usize]
    }
}

impl TryFrom<u8> for PitchClass {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        PitchClass::new(v).ok_or_else(|| format!("pitch class {v} out of range"))
    }
}

impl From<PitchClass> for u8 {
    fn from(p: PitchClass) -> u8 {
        p.0
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Uniform over the 12 pitch classes, fixed by the session seed.
pub fn assign_global_key(session_seed: u64) -> PitchClass {
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed);
    PitchClass(rng.random_range(0..12))
}

/// The seven scale pitch classes, ascending from the key.
pub fn scale_pitches(key: PitchClass, mode: Mode) -> Vec<PitchClass> {
    mode.intervals().iter().map(|&i| key.transpose(i)).collect()
}

/// Open-string MIDI pitches, top string first: A3 D3 G3 B3 E4.
pub const OPEN_STRING_PITCHES: [u8; 5] = [57, 50, 55, 59, 64];
pub const PLUCK_VELOCITY: f64 = 0.8;
pub const PLUCK_DURATION_MS: u32 = 2_000;

/// The note a hand plays when it crosses a string. Pluck pitches are fixed
/// and deliberately ignore the current key and mode.
pub fn on_pluck(string_index: u8, onset: Timestamp, hand_id: u8) -> Result<SoundEvent, MusicError> {
    let pitch = *OPEN_STRING_PITCHES.get(string_index as usize).ok_or(MusicError::BadStringIndex(string_index))?;
    Ok(SoundEvent {
        onset,
        kind: EventKind::NotePluck,
        layer_id: None,
        sound_id: None,
        pitch: Some(pitch),
        velocity: PLUCK_VELOCITY,
        duration_ms: PLUCK_DURATION_MS,
        string_index: Some(string_index),
        hand_id: Some(hand_id),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reading(c: WeatherCondition) -> WeatherReading {
        WeatherReading { condition: c, fetched_at: Timestamp(0) }
    }

    #[test]
    fn weather_rule() {
        assert_eq!(mode_from_weather(&reading(WeatherCondition::Sunny)), Mode::Upbeat);
        assert_eq!(mode_from_weather(&reading(WeatherCondition::Rainy)), Mode::Melancholic);
        assert_eq!(mode_from_weather(&reading(WeatherCondition::PartlyCloudy)), Mode::Neutral);
        assert_eq!(mode_from_weather(&reading(WeatherCondition::Other("fog".into()))), Mode::Neutral);
    }

    #[test]
    fn attribute_mapping() {
        assert_eq!(attribute_for_layer(LayerId::SocialMedia), MusicalAttribute::Accents);
        assert_eq!(attribute_for_layer(LayerId::Nature), MusicalAttribute::Atmospheric);
        let mut seen: Vec<MusicalAttribute> = LayerId::ALL.into_iter().map(attribute_for_layer).collect();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn c_major_and_a_minor() {
        use PitchClass as P;
        assert_eq!(scale_pitches(P::C, Mode::Upbeat), vec![P::C, P::D, P::E, P::F, P::G, P::A, P::B]);
        assert_eq!(scale_pitches(P::A, Mode::Melancholic), vec![P::A, P::B, P::C, P::D, P::E, P::F, P::G]);
        assert_eq!(scale_pitches(P::D, Mode::Neutral), vec![P::D, P::E, P::F, P::G, P::A, P::B, P::C]);
    }

    #[test]
    fn every_scale_has_seven_classes_and_the_key() {
        for k in 0..12 {
            let key = PitchClass::new(k).unwrap();
            for mode in Mode::ALL {
                let s = scale_pitches(key, mode);
                let mut uniq = s.clone();
                uniq.sort();
                uniq.dedup();
                assert_eq!(uniq.len(), 7);
                assert_eq!(s[0], key);
            }
        }
    }

    #[test]
    fn key_is_deterministic() {
        assert_eq!(assign_global_key(7), assign_global_key(7));
    }

    #[test]
    fn key_golden_seed_zero() {
        assert_eq!(assign_global_key(0).value(), GOLDEN_KEY_SEED_0);
    }

    // Produced by the ChaCha8 key draw on first run, then frozen.
    const GOLDEN_KEY_SEED_0: u8 = 7;

    #[test]
    fn pluck_pitch_classes() {
        let names: Vec<&str> =
            (0..5).map(|i| PitchClass::of_midi(on_pluck(i, Timestamp(0), 0).unwrap().pitch.unwrap()).name()).collect();
        assert_eq!(names, ["A", "D", "G", "B", "E"]);
        assert_eq!(on_pluck(0, Timestamp(0), 0).unwrap().velocity, 0.8);
        assert_eq!(on_pluck(5, Timestamp(0), 0), Err(MusicError::BadStringIndex(5)));
    }
}
