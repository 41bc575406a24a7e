//! Standard MIDI file (type 0) export of an event log.

use super::{SoundEvent, TEMPO_BPM};
use crate::layers::LayerId;

const TICKS_PER_QUARTER: u16 = 480;
const PERCUSSION_CHANNEL: u8 = 9;

fn channel_for(event: &SoundEvent) -> u8 {
    match event.layer_id {
        None => 0,
        Some(layer) => 1 + layer.pace_rank(),
    }
}

/// Unpitched layer sounds map onto the percussion channel, one note per layer.
fn note_for(event: &SoundEvent) -> (u8, u8) {
    match event.pitch {
        Some(p) => (channel_for(event), p.min(127)),
        None => {
            let rank = event.layer_id.map_or(0, LayerId::pace_rank);
            (PERCUSSION_CHANNEL, 37 + rank)
        }
    }
}

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 5];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Renders events as a single-track SMF at the session tempo. Times are
/// relative to the earliest onset.
pub fn write_midi(events: &[SoundEvent]) -> Vec<u8> {
    let origin = events.iter().map(|e| e.onset.as_millis()).min().unwrap_or(0);
    let ms_per_quarter = 60_000.0 / TEMPO_BPM;
    let to_ticks = |ms: i64| ((ms - origin) as f64 * TICKS_PER_QUARTER as f64 / ms_per_quarter).round() as u64;

    // (tick, order, bytes); note-offs sort before note-ons at the same tick.
    let mut timeline: Vec<(u64, u8, [u8; 3])> = Vec::with_capacity(events.len() * 2);
    for e in events {
        let (ch, note) = note_for(e);
        let vel = (e.velocity.clamp(0.0, 1.0) * 127.0).round().max(1.0) as u8;
        let on = to_ticks(e.onset.as_millis());
        let off = to_ticks(e.onset.as_millis() + e.duration_ms.max(1) as i64).max(on + 1);
        timeline.push((on, 1, [0x90 | ch, note, vel]));
        timeline.push((off, 0, [0x80 | ch, note, 0]));
    }
    timeline.sort_by_key(|(tick, order, _)| (*tick, *order));

    let mut track = Vec::new();
    let us_per_quarter = (ms_per_quarter * 1000.0).round() as u32;
    track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    track.extend_from_slice(&us_per_quarter.to_be_bytes()[1..]);
    let mut last = 0u64;
    for (tick, _, msg) in timeline {
        write_vlq(&mut track, (tick - last).min(0x0fff_ffff) as u32);
        track.extend_from_slice(&msg);
        last = tick;
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&TICKS_PER_QUARTER.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}
