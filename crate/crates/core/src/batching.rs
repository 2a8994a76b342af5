//! Modality-homogeneous batch planning over a compiled mixture.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conversation::{Conversation, Modality};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub modality: Modality,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
    pub batches: Vec<Batch>,
}

impl BatchPlan {
    pub fn count(&self, modality: Modality) -> usize {
        self.batches.iter().filter(|b| b.modality == modality).count()
    }
}

/// Shuffles ids within each modality, cuts them into `batch_size` chunks and
/// interleaves the chunks with draws weighted by how many batches each
/// modality has left. Every id lands in exactly one batch.
pub fn plan_batches(mixture: &[Conversation], batch_size: usize, seed: u64) -> Result<BatchPlan> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    if mixture.is_empty() {
        return Err(Error::InvalidInput("cannot plan batches for an empty mixture".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queues: Vec<(Modality, std::vec::IntoIter<Vec<String>>, usize)> = Vec::new();
    for modality in [Modality::Visual, Modality::Text] {
        let mut ids: Vec<String> =
            mixture.iter().filter(|c| c.modality() == modality).map(|c| c.id.clone()).collect();
        if ids.is_empty() {
            continue;
        }
        ids.shuffle(&mut rng);
        let chunks: Vec<Vec<String>> = ids.chunks(batch_size).map(<[String]>::to_vec).collect();
        let n = chunks.len();
        queues.push((modality, chunks.into_iter(), n));
    }

    let total: usize = queues.iter().map(|q| q.2).sum();
    let mut batches = Vec::with_capacity(total);
    for remaining in (1..=total).rev() {
        let mut draw = rng.gen_range(0..remaining);
        let queue = queues
            .iter_mut()
            .find(|q| {
                if draw < q.2 {
                    true
                } else {
                    draw -= q.2;
                    false
                }
            })
            .expect("draw is below the remaining batch count");
        queue.2 -= 1;
        let ids = queue.1.next().expect("queue count tracks its chunks");
        batches.push(Batch { modality: queue.0, ids });
    }
    Ok(BatchPlan { batch_size, seed, batches })
}
