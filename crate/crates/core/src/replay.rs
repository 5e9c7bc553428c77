//! Bounded FIFO replay memory shared by real and imagined experience.

use std::collections::VecDeque;
use std::sync::Arc;

use parking_lot::Mutex;
use rand::Rng;

use crate::env::{ActionId, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
    /// Produced by a backward rollout rather than the environment.
    /// Diagnostic only: samplers treat both kinds alike.
    pub imagined: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
    insertions: u64,
    imagined_insertions: u64,
    real_stored: usize,
}

impl ReplayBuffer {
    /// Capacity used in every published experiment.
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            insertions: 0,
            imagined_insertions: 0,
            real_stored: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total appends since construction, evicted or not.
    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    /// Total imagined appends since construction.
    pub fn imagined_insertions(&self) -> u64 {
        self.imagined_insertions
    }

    /// Real transitions currently stored.
    pub fn real_len(&self) -> usize {
        self.real_stored
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    pub fn append(&mut self, transition: Transition) {
        if self.entries.len() == self.capacity {
            if let Some(old) = self.entries.pop_front() {
                if !old.imagined {
                    self.real_stored -= 1;
                }
            }
        }
        self.insertions += 1;
        if transition.imagined {
            self.imagined_insertions += 1;
        } else {
            self.real_stored += 1;
        }
        self.entries.push_back(transition);
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 || self.entries.len() < batch_size {
            return Err(Error::InsufficientData {
                requested: batch_size,
                available: self.entries.len(),
            });
        }
        let n = self.entries.len();
        Ok((0..batch_size)
            .map(|_| &self.entries[rng.random_range(0..n)])
            .collect())
    }

    /// Uniform sample with replacement over real transitions only.
    pub fn sample_real<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>> {
        if batch_size == 0 || self.real_stored < batch_size {
            return Err(Error::InsufficientData {
                requested: batch_size,
                available: self.real_stored,
            });
        }
        let n = self.entries.len();
        let mut out = Vec::with_capacity(batch_size);
        // Rejection sampling keeps the draw uniform over real entries.
        while out.len() < batch_size {
            let t = &self.entries[rng.random_range(0..n)];
            if !t.imagined {
                out.push(t);
            }
        }
        Ok(out)
    }
}

/// Thread-safe handle to one [`ReplayBuffer`]. Every operation takes the
/// lock once, so concurrent appends and samples are linearizable.
#[derive(Debug, Clone)]
pub struct SharedReplayBuffer(Arc<Mutex<ReplayBuffer>>);

impl SharedReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        SharedReplayBuffer(Arc::new(Mutex::new(ReplayBuffer::new(capacity))))
    }

    pub fn append(&self, transition: Transition) {
        self.0.lock().append(transition);
    }

    pub fn append_all(&self, transitions: impl IntoIterator<Item = Transition>) {
        let mut guard = self.0.lock();
        for t in transitions {
            guard.append(t);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        let guard = self.0.lock();
        Ok(guard.sample(batch_size, rng)?.into_iter().cloned().collect())
    }

    pub fn sample_real<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<Transition>> {
        let guard = self.0.lock();
        Ok(guard.sample_real(batch_size, rng)?.into_iter().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.0.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.lock().is_empty()
    }

    /// Runs `f` with exclusive access to the underlying buffer.
    pub fn with<T>(&self, f: impl FnOnce(&mut ReplayBuffer) -> T) -> T {
        f(&mut self.0.lock())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tagged(i: usize, imagined: bool) -> Transition {
        Transition {
            state: StateVector(vec![i as f64]),
            action: ActionId(0),
            reward: 0.0,
            next_state: StateVector(vec![i as f64 + 1.0]),
            terminal: false,
            imagined,
        }
    }

    #[test]
    fn append_and_evict() {
        let mut buf = ReplayBuffer::new(3);
        buf.append(tagged(0, false));
        assert_eq!(buf.len(), 1);
        for i in 1..4 {
            buf.append(tagged(i, false));
        }
        assert_eq!(buf.len(), 3);
        assert!(buf.iter().all(|t| t.state.0[0] != 0.0));
        assert_eq!(buf.insertions(), 4);
    }

    #[test]
    fn fills_to_published_capacity() {
        let mut buf = ReplayBuffer::new(ReplayBuffer::DEFAULT_CAPACITY);
        for i in 0..10_000 {
            buf.append(tagged(i, false));
        }
        assert_eq!(buf.len(), 10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample(100, &mut rng).unwrap();
        assert_eq!(batch.len(), 100);
        assert!(batch.iter().all(|t| t.state.0[0] < 10_000.0));
    }

    #[test]
    fn single_entry_sample() {
        let mut buf = ReplayBuffer::new(4);
        buf.append(tagged(7, false));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap(), vec![&tagged(7, false)]);
    }

    #[test]
    fn underfull_sample_is_an_error() {
        let mut buf = ReplayBuffer::new(4);
        buf.append(tagged(0, false));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(2, &mut rng),
            Err(Error::InsufficientData { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn real_sampling_skips_imagined_entries() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..8 {
            buf.append(tagged(i, i % 4 != 0));
        }
        assert_eq!(buf.real_len(), 2);
        assert_eq!(buf.imagined_insertions(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = buf.sample_real(50, &mut rng).unwrap_err();
        assert!(matches!(batch, Error::InsufficientData { available: 2, .. }));
        let batch = buf.sample_real(2, &mut rng).unwrap();
        assert!(batch.iter().all(|t| !t.imagined));

        // Evicting a real entry updates the count.
        buf.append(tagged(8, true));
        assert_eq!(buf.real_len(), 1);
    }
}
