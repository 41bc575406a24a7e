use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{DataSnapshot, IngestError};
use crate::layers::LayerId;

/// Last-good snapshot per layer. Snapshots are published as `Arc`s, so
/// readers hold an immutable copy while newer ones replace it.
#[derive(Debug, Default, Clone)]
pub struct SnapshotStore {
    snapshots: BTreeMap<LayerId, Arc<DataSnapshot>>,
    in_flight: BTreeSet<LayerId>,
    last_error: BTreeMap<LayerId, IngestError>,
}

impl SnapshotStore {
    pub fn new() -> Self {
        SnapshotStore::default()
    }

    /// Marks a fetch as started. Returns `false` if one is already running.
    pub fn begin_fetch(&mut self, layer: LayerId) -> bool {
        self.in_flight.insert(layer)
    }

    pub fn is_in_flight(&self, layer: LayerId) -> bool {
        self.in_flight.contains(&layer)
    }

    /// Finishes a fetch. Returns the newly published snapshot, if any. A
    /// failure or an out-of-order result leaves the previous snapshot in place.
    pub fn complete_fetch(
        &mut self,
        layer: LayerId,
        result: Result<DataSnapshot, IngestError>,
    ) -> Option<Arc<DataSnapshot>> {
        self.in_flight.remove(&layer);
        match result {
            Ok(snapshot) => {
                debug_assert_eq!(snapshot.layer_id, layer);
                self.last_error.remove(&layer);
                self.publish(snapshot)
            }
            Err(e) => {
                self.last_error.insert(layer, e);
                None
            }
        }
    }

    /// Publishes unless it would move `fetched_at` backwards.
    pub fn publish(&mut self, snapshot: DataSnapshot) -> Option<Arc<DataSnapshot>> {
        let layer = snapshot.layer_id;
        if let Some(prev) = self.snapshots.get(&layer) {
            if snapshot.fetched_at < prev.fetched_at {
                return None;
            }
        }
        let snapshot = Arc::new(snapshot);
        self.snapshots.insert(layer, Arc::clone(&snapshot));
        Some(snapshot)
    }

    pub fn get(&self, layer: LayerId) -> Option<Arc<DataSnapshot>> {
        self.snapshots.get(&layer).cloned()
    }

    pub fn last_error(&self, layer: LayerId) -> Option<&IngestError> {
        self.last_error.get(&layer)
    }

    pub fn is_complete(&self) -> bool {
        LayerId::ALL.iter().all(|l| self.snapshots.contains_key(l))
    }
}
