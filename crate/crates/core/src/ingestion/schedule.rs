//! Refresh planning across sources, narrations and weather.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::layers::{LayerId, PaceLayer};
use crate::time::Timestamp;

pub const NARRATION_PERIOD: Duration = Duration::from_secs(24 * 60 * 60);
pub const WEATHER_PERIOD: Duration = Duration::from_secs(60 * 60);

/// Operator-only acceleration applied uniformly to every cadence.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeScale(f64);

impl TimeScale {
    pub const REAL_TIME: TimeScale = TimeScale(1.0);

    pub fn new(factor: f64) -> Result<Self, IngestError> {
        if factor.is_finite() && factor > 0.0 {
            Ok(TimeScale(factor))
        } else {
            Err(IngestError::InvalidTimeScale(factor))
        }
    }

    pub fn factor(self) -> f64 {
        self.0
    }

    /// `period / factor`, rounded to whole milliseconds, never below 1 ms.
    pub fn scale(self, period: Duration) -> Duration {
        let ms = (period.as_millis() as f64 / self.0).round().max(1.0);
        Duration::from_millis(ms as u64)
    }
}

impl Default for TimeScale {
    fn default() -> Self {
        TimeScale::REAL_TIME
    }
}

impl TryFrom<f64> for TimeScale {
    type Error = IngestError;

    fn try_from(f: f64) -> Result<Self, Self::Error> {
        TimeScale::new(f)
    }
}

impl From<TimeScale> for f64 {
    fn from(t: TimeScale) -> f64 {
        t.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "target", content = "layer", rename_all = "snake_case")]
pub enum RefreshTarget {
    Source(LayerId),
    Narration(LayerId),
    Weather,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub target: RefreshTarget,
    pub last: Option<Timestamp>,
    /// Scaled period.
    pub period: Duration,
    pub next: Timestamp,
}

/// Entries sorted by `(next, target)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchedulePlan {
    pub entries: Vec<ScheduleEntry>,
}

impl SchedulePlan {
    pub fn order(&self) -> Vec<RefreshTarget> {
        self.entries.iter().map(|e| e.target).collect()
    }

    pub fn due(&self, now: Timestamp) -> impl Iterator<Item = &ScheduleEntry> {
        self.entries.iter().take_while(move |e| e.next <= now)
    }

    pub fn next_due(&self) -> Option<Timestamp> {
        self.entries.first().map(|e| e.next)
    }

    pub fn get(&self, target: RefreshTarget) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.target == target)
    }
}

/// Builds the refresh plan. Targets never refreshed before are due at `now`.
pub fn build_schedule(
    layers: &[PaceLayer],
    last_refresh: &BTreeMap<RefreshTarget, Timestamp>,
    scale: TimeScale,
    now: Timestamp,
) -> Result<SchedulePlan, IngestError> {
    let missing: Vec<LayerId> = LayerId::ALL.into_iter().filter(|id| !layers.iter().any(|l| l.id == *id)).collect();
    if !missing.is_empty() {
        return Err(IngestError::IncompleteLayers(missing));
    }

    let entry = |target, period: Duration| {
        let last = last_refresh.get(&target).copied();
        let period = scale.scale(period);
        ScheduleEntry { target, last, period, next: last.map_or(now, |t| t + period) }
    };

    let mut entries: Vec<ScheduleEntry> = layers
        .iter()
        .flat_map(|l| {
            [
                entry(RefreshTarget::Source(l.id), l.cadence.period),
                entry(RefreshTarget::Narration(l.id), NARRATION_PERIOD),
            ]
        })
        .chain([entry(RefreshTarget::Weather, WEATHER_PERIOD)])
        .collect();
    entries.sort_by_key(|e| (e.next, e.target));
    Ok(SchedulePlan { entries })
}
