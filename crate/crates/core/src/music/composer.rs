//! Beat-clocked sequencer.
//!
//! Every layer voice follows the grammar of its attribute:
//!
//! | attribute      | trigger                           | pitch                  |
//! |----------------|-----------------------------------|------------------------|
//! | Timekeepers    | every beat, even at zero activity | none                   |
//! | Bass           | each downbeat                     | root, then fifth       |
//! | PadsAndChords  | every 4 bars                      | diatonic triad         |
//! | Scales         | bar start, p = activity           | 8-note stepwise run    |
//! | Accents        | any beat, p = activity / 2        | random degree, off-grid|
//! | Atmospheric    | every 4 bars                      | none, long sound       |
//!
//! Voices other than Timekeepers are silent at zero activity. All pitched
//! layer events come from the current scale.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    assign_global_key, attribute_for_layer, mode_from_weather, EventKind, Mode, MusicError, MusicalAttribute,
    PitchClass, SoundEvent,
};
use crate::ingestion::WeatherReading;
use crate::layers::LayerId;
use crate::time::Timestamp;

pub const TEMPO_BPM: f64 = 60.0;
pub const BEATS_PER_BAR: u64 = 4;
const PHRASE_BEATS: u64 = 4 * BEATS_PER_BAR;
const ACCENT_DENSITY: f64 = 0.5;
const ACCENT_OFFSETS: [f64; 4] = [0.25, 1.0 / 3.0, 2.0 / 3.0, 0.75];
const PAD_DEGREES: [i32; 4] = [0, 3, 4, 5];
const RNG_STREAM: u64 = 0x5eed_c0de_a11c_e5e5;

/// A layer voice: the sounds it may play and how active it is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerVoice {
    pub matched: Vec<u32>,
    /// In `[0, 1]`.
    pub activity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositionState {
    global_key: PitchClass,
    mode: Mode,
    per_layer: BTreeMap<LayerId, LayerVoice>,
    session_seed: u64,
    tempo_bpm: f64,
    start: Timestamp,
}

impl CompositionState {
    /// Draws the global key from the seed and the mode from the weather.
    /// Key and tempo are fixed for the lifetime of the state.
    pub fn new(session_seed: u64, weather: &WeatherReading, start: Timestamp) -> Self {
        CompositionState {
            global_key: assign_global_key(session_seed),
            mode: mode_from_weather(weather),
            per_layer: BTreeMap::new(),
            session_seed,
            tempo_bpm: TEMPO_BPM,
            start,
        }
    }

    pub fn global_key(&self) -> PitchClass {
        self.global_key
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn tempo_bpm(&self) -> f64 {
        self.tempo_bpm
    }

    pub fn session_seed(&self) -> u64 {
        self.session_seed
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn voice(&self, layer: LayerId) -> Option<&LayerVoice> {
        self.per_layer.get(&layer)
    }

    pub fn voices(&self) -> &BTreeMap<LayerId, LayerVoice> {
        &self.per_layer
    }

    /// Returns whether the mode changed.
    pub fn apply_weather(&mut self, weather: &WeatherReading) -> bool {
        let mode = mode_from_weather(weather);
        let changed = mode != self.mode;
        self.mode = mode;
        changed
    }

    pub fn set_voice(&mut self, layer: LayerId, voice: LayerVoice) {
        self.per_layer.insert(layer, voice);
    }

    pub fn scale(&self) -> Vec<PitchClass> {
        super::scale_pitches(self.global_key, self.mode)
    }

    fn beat_ms(&self) -> f64 {
        60_000.0 / self.tempo_bpm
    }

    pub fn validate(&self) -> Result<(), MusicError> {
        for layer in LayerId::ALL {
            let voice =
                self.per_layer.get(&layer).ok_or_else(|| MusicError::InvalidState(format!("no voice for {layer}")))?;
            if !(0.0..=1.0).contains(&voice.activity) {
                return Err(MusicError::InvalidState(format!("{layer} activity {} outside [0, 1]", voice.activity)));
            }
            if voice.matched.is_empty() {
                return Err(MusicError::InvalidState(format!("{layer} has no matched sounds")));
            }
        }
        Ok(())
    }
}

/// Owns the composition state, its random stream and the beat cursor.
#[derive(Clone, Debug)]
pub struct Composer {
    state: CompositionState,
    rng: ChaCha8Rng,
    next_beat: u64,
}

impl Composer {
    pub fn new(state: CompositionState) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(state.session_seed ^ RNG_STREAM);
        Composer { state, rng, next_beat: 0 }
    }

    pub fn state(&self) -> &CompositionState {
        &self.state
    }

    pub fn apply_weather(&mut self, weather: &WeatherReading) -> bool {
        self.state.apply_weather(weather)
    }

    pub fn set_voice(&mut self, layer: LayerId, voice: LayerVoice) {
        self.state.set_voice(layer, voice);
    }

    pub fn beats_elapsed(&self) -> u64 {
        self.next_beat
    }

    fn beat_onset(&self, beat: u64) -> Timestamp {
        Timestamp(self.state.start.as_millis() + (beat as f64 * self.state.beat_ms()).round() as i64)
    }

    /// Emits the events of every beat whose onset is at or before `t` and
    /// has not been composed yet.
    pub fn compose_tick(&mut self, t: Timestamp) -> Result<Vec<SoundEvent>, MusicError> {
        if t < self.state.start {
            return Err(MusicError::InvalidState(format!(
                "tick at {} precedes session start {}",
                t.as_millis(),
                self.state.start.as_millis()
            )));
        }
        self.state.validate()?;
        let mut events = Vec::new();
        while self.beat_onset(self.next_beat) <= t {
            let beat = self.next_beat;
            self.compose_beat(beat, &mut events);
            self.next_beat += 1;
        }
        Ok(events)
    }

    fn compose_beat(&mut self, beat: u64, out: &mut Vec<SoundEvent>) {
        let onset = self.beat_onset(beat);
        for layer in LayerId::ALL {
            let voice = self.state.per_layer[&layer].clone();
            match attribute_for_layer(layer) {
                MusicalAttribute::Accents => self.accents(layer, &voice, onset, out),
                MusicalAttribute::Bass => self.bass(layer, &voice, beat, onset, out),
                MusicalAttribute::Timekeepers => self.timekeeper(layer, &voice, beat, onset, out),
                MusicalAttribute::PadsAndChords => self.pads(layer, &voice, beat, onset, out),
                MusicalAttribute::Scales => self.scales(layer, &voice, beat, onset, out),
                MusicalAttribute::Atmospheric => self.atmosphere(layer, &voice, beat, onset, out),
            }
        }
    }

    /// MIDI pitch of a (possibly negative or >6) scale degree above the key
    /// in the octave whose C is `base`.
    fn degree_pitch(&self, degree: i32, base: u8) -> u8 {
        let intervals = self.state.mode.intervals();
        let octave = degree.div_euclid(7);
        let step = intervals[degree.rem_euclid(7) as usize] as i32;
        (base as i32 + self.state.global_key.value() as i32 + step + 12 * octave).clamp(0, 127) as u8
    }

    fn pick_sound(&mut self, voice: &LayerVoice) -> u32 {
        voice.matched[self.rng.random_range(0..voice.matched.len())]
    }

    #[allow(clippy::too_many_arguments)]
    fn event(
        layer: LayerId,
        onset: Timestamp,
        sound_id: u32,
        pitch: Option<u8>,
        velocity: f64,
        duration_ms: f64,
    ) -> SoundEvent {
        SoundEvent {
            onset,
            kind: EventKind::LayerSound,
            layer_id: Some(layer),
            sound_id: Some(sound_id),
            pitch,
            velocity: (velocity.clamp(0.0, 1.0) * 1000.0).round() / 1000.0,
            duration_ms: duration_ms.round() as u32,
            string_index: None,
            hand_id: None,
        }
    }

    fn timekeeper(
        &mut self,
        layer: LayerId,
        voice: &LayerVoice,
        beat: u64,
        onset: Timestamp,
        out: &mut Vec<SoundEvent>,
    ) {
        let downbeat = beat.is_multiple_of(BEATS_PER_BAR);
        let sound = voice.matched[((beat / PHRASE_BEATS) as usize) % voice.matched.len()];
        let velocity = if downbeat { 0.6 } else { 0.4 } + 0.3 * voice.activity;
        out.push(Self::event(layer, onset, sound, None, velocity, 0.1 * self.state.beat_ms()));
    }

    fn bass(&mut self, layer: LayerId, voice: &LayerVoice, beat: u64, onset: Timestamp, out: &mut Vec<SoundEvent>) {
        if voice.activity <= 0.0 || !beat.is_multiple_of(BEATS_PER_BAR) {
            return;
        }
        let bar = beat / BEATS_PER_BAR;
        let degree = if bar.is_multiple_of(2) { 0 } else { 4 };
        let pitch = self.degree_pitch(degree, 36);
        let sound = self.pick_sound(voice);
        let beat_ms = self.state.beat_ms();
        out.push(Self::event(layer, onset, sound, Some(pitch), 0.5 + 0.4 * voice.activity, 2.0 * beat_ms));
    }

    fn pads(&mut self, layer: LayerId, voice: &LayerVoice, beat: u64, onset: Timestamp, out: &mut Vec<SoundEvent>) {
        if voice.activity <= 0.0 || !beat.is_multiple_of(PHRASE_BEATS) {
            return;
        }
        let root = PAD_DEGREES[self.rng.random_range(0..PAD_DEGREES.len())];
        let sound = self.pick_sound(voice);
        let duration = PHRASE_BEATS as f64 * self.state.beat_ms();
        for offset in [0, 2, 4] {
            let pitch = self.degree_pitch(root + offset, 48);
            out.push(Self::event(layer, onset, sound, Some(pitch), 0.3 + 0.3 * voice.activity, duration));
        }
    }

    fn scales(&mut self, layer: LayerId, voice: &LayerVoice, beat: u64, onset: Timestamp, out: &mut Vec<SoundEvent>) {
        if voice.activity <= 0.0 || !beat.is_multiple_of(BEATS_PER_BAR) {
            return;
        }
        if self.rng.random::<f64>() >= voice.activity {
            return;
        }
        let start = self.rng.random_range(0..7);
        let step = if self.rng.random::<bool>() { 1 } else { -1 };
        let sound = self.pick_sound(voice);
        let eighth = self.state.beat_ms() / 2.0;
        for i in 0..8i32 {
            let pitch = self.degree_pitch(start + step * i, 60);
            let at = Timestamp(onset.as_millis() + (i as f64 * eighth).round() as i64);
            out.push(Self::event(layer, at, sound, Some(pitch), 0.35 + 0.4 * voice.activity, eighth));
        }
    }

    fn accents(&mut self, layer: LayerId, voice: &LayerVoice, onset: Timestamp, out: &mut Vec<SoundEvent>) {
        if voice.activity <= 0.0 {
            return;
        }
        if self.rng.random::<f64>() >= ACCENT_DENSITY * voice.activity {
            return;
        }
        let offset = ACCENT_OFFSETS[self.rng.random_range(0..ACCENT_OFFSETS.len())];
        let degree = self.rng.random_range(0..7);
        let sound = self.pick_sound(voice);
        let beat_ms = self.state.beat_ms();
        let at = Timestamp(onset.as_millis() + (offset * beat_ms).round() as i64);
        let pitch = self.degree_pitch(degree, 72);
        out.push(Self::event(layer, at, sound, Some(pitch), 0.4 + 0.4 * voice.activity, 0.25 * beat_ms));
    }

    fn atmosphere(
        &mut self,
        layer: LayerId,
        voice: &LayerVoice,
        beat: u64,
        onset: Timestamp,
        out: &mut Vec<SoundEvent>,
    ) {
        if voice.activity <= 0.0 || !beat.is_multiple_of(PHRASE_BEATS) {
            return;
        }
        let sound = self.pick_sound(voice);
        let duration = PHRASE_BEATS as f64 * self.state.beat_ms();
        out.push(Self::event(layer, onset, sound, None, 0.3 + 0.3 * voice.activity, duration));
    }
}
