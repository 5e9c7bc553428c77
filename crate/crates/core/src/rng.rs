//! Seeded random substreams.
//!
//! Every consumer of randomness inside a trial draws from its own ChaCha
//! stream derived from one root seed. Adding a consumer (for example turning
//! imagination on) never shifts the sequence seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Q-network initialization.
    QInit,
    /// Backward-model initialization.
    ModelInit,
    /// Random actions during warmup collection.
    Env,
    /// Epsilon-greedy exploration.
    Agent,
    /// Minibatch sampling for the Q learner.
    Replay,
    /// Minibatch sampling for the backward model.
    ModelReplay,
    /// One imagination stream.
    Imagination(u32),
}

impl Substream {
    fn id(self) -> u64 {
        match self {
            Substream::QInit => 1,
            Substream::ModelInit => 2,
            Substream::Env => 3,
            Substream::Agent => 4,
            Substream::Replay => 5,
            Substream::ModelReplay => 6,
            Substream::Imagination(i) => 1_000 + u64::from(i),
        }
    }
}

pub fn substream(seed: u64, stream: Substream) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
