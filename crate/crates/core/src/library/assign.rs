use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LibraryError, SoundLibrary};

/// Random sound assignment for labelers, seeded for reproducibility.
#[derive(Clone, Debug)]
pub struct LabelingSession {
    rng: ChaCha8Rng,
}

impl LabelingSession {
    pub fn new(seed: u64) -> Self {
        LabelingSession { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// A uniformly random sound the labeler has not labeled yet, or any sound
    /// once they have labeled them all.
    pub fn next_assignment(&mut self, library: &SoundLibrary, labeler_id: &str) -> Result<u32, LibraryError> {
        if library.is_empty() {
            return Err(LibraryError::EmptyLibrary);
        }
        let done = library.labeled_by(labeler_id);
        let fresh: Vec<u32> = library.sound_ids().filter(|id| !done.contains(id)).collect();
        let pool: Vec<u32> = if fresh.is_empty() { library.sound_ids().collect() } else { fresh };
        Ok(pool[self.rng.random_range(0..pool.len())])
    }
}
