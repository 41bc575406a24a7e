//! The six pace layers, fastest to slowest.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::music::{attribute_for_layer, MusicalAttribute};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerId {
    SocialMedia = 0,
    Commerce = 1,
    Infrastructure = 2,
    Governance = 3,
    Culture = 4,
    Nature = 5,
}

impl LayerId {
    /// All layers ordered by pace rank.
    pub const ALL: [LayerId; 6] = [
        LayerId::SocialMedia,
        LayerId::Commerce,
        LayerId::Infrastructure,
        LayerId::Governance,
        LayerId::Culture,
        LayerId::Nature,
    ];

    /// 0 is the fastest-changing layer.
    pub fn pace_rank(self) -> u8 {
        self as u8
    }

    pub fn from_pace_rank(rank: u8) -> Option<LayerId> {
        LayerId::ALL.get(rank as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::SocialMedia => "social_media",
            LayerId::Commerce => "commerce",
            LayerId::Infrastructure => "infrastructure",
            LayerId::Governance => "governance",
            LayerId::Culture => "culture",
            LayerId::Nature => "nature",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            LayerId::SocialMedia => "Social Media",
            LayerId::Commerce => "Commerce",
            LayerId::Infrastructure => "Infrastructure",
            LayerId::Governance => "Governance",
            LayerId::Culture => "Culture",
            LayerId::Nature => "Nature",
        }
    }

    /// The data source kind each layer is fed from.
    pub fn source_kind(self) -> SourceKind {
        match self {
            LayerId::SocialMedia => SourceKind::SocialFeed,
            LayerId::Commerce => SourceKind::EconomyIndicators,
            LayerId::Infrastructure => SourceKind::InfrastructureIndicators,
            LayerId::Governance => SourceKind::PublicSectorIndicators,
            LayerId::Culture => SourceKind::WikipediaMostRead,
            LayerId::Nature => SourceKind::Co2Series,
        }
    }

    /// Default source refresh period. Monotone non-decreasing in pace rank.
    pub fn default_period(self) -> Duration {
        const MINUTE: u64 = 60;
        const DAY: u64 = 24 * 60 * MINUTE;
        match self {
            LayerId::SocialMedia => Duration::from_secs(15 * MINUTE),
            LayerId::Commerce | LayerId::Infrastructure | LayerId::Governance | LayerId::Culture => {
                Duration::from_secs(DAY)
            }
            LayerId::Nature => Duration::from_secs(7 * DAY),
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerId::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown layer `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    SocialFeed,
    EconomyIndicators,
    InfrastructureIndicators,
    PublicSectorIndicators,
    WikipediaMostRead,
    Co2Series,
    Weather,
}

impl SourceKind {
    /// The layer a source feeds. Weather feeds none; it only drives the mode.
    pub fn layer(self) -> Option<LayerId> {
        LayerId::ALL.into_iter().find(|l| l.source_kind() == self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSourceDescriptor {
    pub kind: SourceKind,
    /// Region or handle identifiers, e.g. `AUS` or `AU-ACT`.
    pub locale: String,
    /// URL for live sources, file path for fixtures.
    pub endpoint: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCadence {
    #[serde(with = "duration_secs")]
    pub period: Duration,
}

impl UpdateCadence {
    pub fn new(period: Duration) -> Option<Self> {
        (!period.is_zero()).then_some(UpdateCadence { period })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaceLayer {
    pub id: LayerId,
    pub pace_rank: u8,
    pub source: DataSourceDescriptor,
    pub cadence: UpdateCadence,
    pub attribute: MusicalAttribute,
}

impl PaceLayer {
    pub fn new(id: LayerId, source: DataSourceDescriptor) -> Self {
        PaceLayer {
            id,
            pace_rank: id.pace_rank(),
            source,
            cadence: UpdateCadence { period: id.default_period() },
            attribute: attribute_for_layer(id),
        }
    }

    /// The six layers with fixture-relative endpoints.
    pub fn defaults() -> Vec<PaceLayer> {
        LayerId::ALL
            .into_iter()
            .map(|id| {
                let source = DataSourceDescriptor {
                    kind: id.source_kind(),
                    locale: default_locale(id).to_string(),
                    endpoint: format!("{}.json", id.name()),
                };
                PaceLayer::new(id, source)
            })
            .collect()
    }
}

fn default_locale(id: LayerId) -> &'static str {
    match id {
        LayerId::SocialMedia => "office",
        LayerId::Commerce | LayerId::Infrastructure | LayerId::Governance => "AUS",
        LayerId::Culture => "en.wikipedia",
        LayerId::Nature => "Canberra",
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_secs)
    }
}
