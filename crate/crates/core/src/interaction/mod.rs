//! The gestural surface: five strings dividing the canvas into six layer
//! bands, and two hand pointers that pluck a string when they cross it.
//!
//! Coordinates are normalized to the unit square with `y` growing downward,
//! so string 0 is the top string and band 0 (the fastest layer) is on top.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::LayerId;
use crate::music::{PitchClass, OPEN_STRING_PITCHES};
use crate::time::Timestamp;

pub const STRING_COUNT: usize = 5;
pub const HAND_COUNT: u8 = 2;
const BASE_FREQ_HZ: f64 = 2.0;
const BASE_AMP: f64 = 0.02;
const FALLOFF: f64 = 1.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("hand id {0} out of range")]
    BadHand(u8),
    #[error("position ({0}, {1}) is not finite")]
    NonFinite(f64, f64),
    #[error("update at {t} precedes last update at {last}")]
    OutOfOrder { last: i64, t: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn clamped(self) -> (Point, bool) {
        let p = Point { x: self.x.clamp(0.0, 1.0), y: self.y.clamp(0.0, 1.0) };
        (p, p != self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringModel {
    pub index: u8,
    /// Rest position.
    pub y: f64,
    pub thickness: f64,
    pub vibration_freq: f64,
    pub vibration_amp: f64,
    pub open_pitch_class: PitchClass,
}

/// Evenly spaced strings at `y = i/6`; faster layers sit above thinner,
/// faster-vibrating strings.
pub fn default_layout() -> Vec<StringModel> {
    (0..STRING_COUNT as u8)
        .map(|i| {
            let falloff = FALLOFF.powi(-(i as i32));
            StringModel {
                index: i,
                y: (i as f64 + 1.0) / 6.0,
                thickness: 1.0 + 0.75 * i as f64,
                vibration_freq: BASE_FREQ_HZ * falloff,
                vibration_amp: BASE_AMP * falloff,
                open_pitch_class: PitchClass::of_midi(OPEN_STRING_PITCHES[i as usize]),
            }
        })
        .collect()
}

/// The layer whose band contains `y`. A point exactly on a string belongs to
/// the band below it.
pub fn band_of(strings: &[StringModel], y: f64) -> LayerId {
    let rank = strings.iter().filter(|s| y >= s.y).count();
    LayerId::from_pace_rank(rank as u8).unwrap_or(LayerId::Nature)
}

/// Instantaneous display offset. Crossing detection never uses it.
pub fn vibration_offset(string: &StringModel, t_secs: f64) -> f64 {
    string.vibration_amp * (TAU * string.vibration_freq * t_secs).sin()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downward,
    Upward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub hand_id: u8,
    pub string_index: u8,
    pub t: Timestamp,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrailConfig {
    pub ttl: Duration,
    pub max_len: usize,
}

impl Default for TrailConfig {
    fn default() -> Self {
        TrailConfig { ttl: Duration::from_millis(2_500), max_len: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrailPoint {
    pub pos: Point,
    pub t: Timestamp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointerState {
    pub hand_id: u8,
    /// Newest first.
    trail: VecDeque<TrailPoint>,
    pub visible: bool,
}

impl PointerState {
    pub fn new(hand_id: u8) -> Result<Self, InteractionError> {
        if hand_id >= HAND_COUNT {
            return Err(InteractionError::BadHand(hand_id));
        }
        Ok(PointerState { hand_id, trail: VecDeque::new(), visible: false })
    }

    pub fn pos(&self) -> Option<Point> {
        self.trail.front().map(|p| p.pos)
    }

    pub fn last_update(&self) -> Option<Timestamp> {
        self.trail.front().map(|p| p.t)
    }

    pub fn trail(&self) -> impl Iterator<Item = &TrailPoint> {
        self.trail.iter()
    }

    pub fn trail_len(&self) -> usize {
        self.trail.len()
    }

    /// `(position, age in seconds)`, newest first.
    pub fn trail_with_ages(&self, now: Timestamp) -> Vec<(Point, f64)> {
        self.trail.iter().map(|p| (p.pos, now.saturating_since(p.t).as_secs_f64())).collect()
    }

    fn prune(&mut self, now: Timestamp, cfg: &TrailConfig) {
        while self.trail.back().is_some_and(|p| now.saturating_since(p.t) > cfg.ttl) && self.trail.len() > 1 {
            self.trail.pop_back();
        }
        self.trail.truncate(cfg.max_len.max(1));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointerOutcome {
    pub state: PointerState,
    pub crossings: Vec<CrossingEvent>,
    /// The input was outside the unit square and has been clamped.
    pub clamped: bool,
}

fn side(y: f64, string_y: f64) -> i8 {
    if y > string_y {
        1
    } else if y < string_y {
        -1
    } else {
        0
    }
}

/// Moves a hand and reports the strings it crossed, in travel order.
///
/// A string fires when the previous position was strictly on one side and
/// the new one is on the string or past it. Landing exactly on a string
/// counts once; leaving it afterwards does not fire again.
pub fn update_pointer(
    state: &PointerState,
    new_pos: Point,
    t: Timestamp,
    strings: &[StringModel],
    cfg: &TrailConfig,
) -> Result<PointerOutcome, InteractionError> {
    if !new_pos.x.is_finite() || !new_pos.y.is_finite() {
        return Err(InteractionError::NonFinite(new_pos.x, new_pos.y));
    }
    if let Some(last) = state.last_update() {
        if t < last {
            return Err(InteractionError::OutOfOrder { last: last.as_millis(), t: t.as_millis() });
        }
    }
    let (pos, clamped) = new_pos.clamped();

    let mut crossings = Vec::new();
    if let Some(prev) = state.pos() {
        let direction = if pos.y > prev.y { Direction::Downward } else { Direction::Upward };
        for s in strings {
            let before = side(prev.y, s.y);
            let after = side(pos.y, s.y);
            if before != 0 && after != before {
                crossings.push(CrossingEvent { hand_id: state.hand_id, string_index: s.index, t, direction });
            }
        }
        crossings.sort_by_key(|c| c.string_index);
        if direction == Direction::Upward {
            crossings.reverse();
        }
    }

    let mut next = state.clone();
    if next.last_update() == Some(t) {
        next.trail.pop_front();
    }
    next.trail.push_front(TrailPoint { pos, t });
    next.visible = true;
    next.prune(t, cfg);
    Ok(PointerOutcome { state: next, crossings, clamped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: f64,
}

/// Green, brown, yellow, blue.
pub const TRAIL_PALETTE: [(u8, u8, u8); 4] = [(46, 139, 87), (139, 94, 60), (218, 165, 32), (70, 130, 180)];

/// Trail color for a point of the given age: the palette is traversed
/// linearly over the trail lifetime while alpha fades from 1 to 0.
pub fn trail_color(age_s: f64, trail_ttl_s: f64) -> Rgba {
    let u = if trail_ttl_s > 0.0 { (age_s / trail_ttl_s).clamp(0.0, 1.0) } else { 1.0 };
    let pos = u * (TRAIL_PALETTE.len() - 1) as f64;
    let i = (pos.floor() as usize).min(TRAIL_PALETTE.len() - 2);
    let f = pos - i as f64;
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (c0, c1) = (TRAIL_PALETTE[i], TRAIL_PALETTE[i + 1]);
    Rgba { r: lerp(c0.0, c1.0), g: lerp(c0.1, c1.1), b: lerp(c0.2, c1.2), a: 1.0 - u }
}
