//! Backward imagination.
//!
//! A rollout starts at a sampled goal and repeatedly picks an action,
//! reconstructs the predecessor with the reverse model and emits the
//! imagined transition `(s_prev, a, R(s_next), s_next)`. Streams generate
//! rollouts either in lock-step with the forward loop (deterministic mode)
//! or on their own threads against periodically refreshed snapshots.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use parking_lot::RwLock;
use rand::Rng;

use crate::backward::BackwardModel;
use crate::env::{ActionId, EnvKind, EnvSpec, StateVector};
use crate::nn::Mlp;
use crate::replay::{ReplayBuffer, SharedReplayBuffer, Transition};
use crate::rng::{substream, Substream, TrialRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionStrategy {
    Random,
    /// Action whose reconstructed predecessor scores highest under Q.
    Greedy,
    /// Random with probability `p_random`, greedy otherwise.
    Mixed { p_random: f64 },
}

impl Default for ActionStrategy {
    fn default() -> Self {
        ActionStrategy::Mixed { p_random: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImaginationConfig {
    pub steps_per_rollout: usize,
    pub stream_count: usize,
    pub strategy: ActionStrategy,
}

impl ImaginationConfig {
    /// 10 imagination steps, one stream.
    pub fn gridworld() -> Self {
        ImaginationConfig {
            steps_per_rollout: 10,
            stream_count: 1,
            strategy: ActionStrategy::default(),
        }
    }

    /// 5 imagination steps, three streams.
    pub fn hanoi() -> Self {
        ImaginationConfig {
            steps_per_rollout: 5,
            stream_count: 3,
            strategy: ActionStrategy::default(),
        }
    }

    pub fn for_env(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Gridworld => Self::gridworld(),
            EnvKind::Hanoi => Self::hanoi(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_rollout == 0 || self.stream_count == 0 {
            return Err(Error::Config(
                "imagination needs at least one step and one stream".into(),
            ));
        }
        if let ActionStrategy::Mixed { p_random } = self.strategy {
            if !(0.0..=1.0).contains(&p_random) {
                return Err(Error::Config(format!("p_random {p_random} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Picks the action to undo from `s_next`.
pub fn sample_imagination_action<R: Rng + ?Sized>(
    strategy: ActionStrategy,
    s_next: &[f64],
    q: &Mlp,
    model: &BackwardModel,
    rng: &mut R,
) -> Result<ActionId> {
    Ok(choose(strategy, s_next, q, model, rng)?.0)
}

/// The chosen action, plus the predecessor already reconstructed for it when
/// the greedy rule had to compute one.
fn choose<R: Rng + ?Sized>(
    strategy: ActionStrategy,
    s_next: &[f64],
    q: &Mlp,
    model: &BackwardModel,
    rng: &mut R,
) -> Result<(ActionId, Option<StateVector>)> {
    let actions = model.action_count();
    let greedy = match strategy {
        ActionStrategy::Random => false,
        ActionStrategy::Greedy => true,
        ActionStrategy::Mixed { p_random } => rng.random::<f64>() >= p_random,
    };
    if !greedy {
        return Ok((ActionId(rng.random_range(0..actions)), None));
    }
    let mut best: Option<(f64, ActionId, StateVector)> = None;
    for a in (0..actions).map(ActionId) {
        let prev = model.predict_previous(s_next, a, rng)?;
        let score = q.forward(&prev)?[a.0];
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, a, prev));
        }
    }
    let (_, a, prev) = best.expect("at least one action");
    Ok((a, Some(prev)))
}

/// One reverse rollout of `steps_per_rollout` imagined transitions, in
/// generation order: the first ends at the goal, and each later one ends at
/// the state the previous one started from.
pub fn backward_rollout<R: Rng + ?Sized>(
    env: &EnvSpec,
    config: &ImaginationConfig,
    q: &Mlp,
    model: &BackwardModel,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    let mut s_next = env.sample_goal(rng);
    let mut out = Vec::with_capacity(config.steps_per_rollout);
    for _ in 0..config.steps_per_rollout {
        let (action, prev) = choose(config.strategy, &s_next, q, model, rng)?;
        let reward = env.reward(&s_next);
        let state = match prev {
            Some(p) => p,
            None => model.predict_previous(&s_next, action, rng)?,
        };
        out.push(Transition {
            state: state.clone(),
            action,
            reward,
            terminal: env.is_goal(&s_next),
            next_state: s_next,
            imagined: true,
        });
        s_next = state;
    }
    Ok(out)
}

/// Read-only parameters used by asynchronous streams.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub q: Mlp,
    pub model: BackwardModel,
}

/// Latest published [`Snapshot`]. Readers clone the `Arc` and never block
/// the publisher for longer than a pointer swap.
#[derive(Debug)]
pub struct SnapshotCell(RwLock<Arc<Snapshot>>);

impl SnapshotCell {
    pub fn new(initial: Snapshot) -> Self {
        SnapshotCell(RwLock::new(Arc::new(initial)))
    }

    pub fn publish(&self, snapshot: Snapshot) {
        *self.0.write() = Arc::new(snapshot);
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.0.read().clone()
    }
}

/// A set of imagination streams, each with its own random substream.
#[derive(Debug)]
pub struct ImaginationEngine {
    config: ImaginationConfig,
    streams: Vec<TrialRng>,
}

impl ImaginationEngine {
    pub fn new(config: ImaginationConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let streams = (0..config.stream_count)
            .map(|i| substream(seed, Substream::Imagination(i as u32)))
            .collect();
        Ok(ImaginationEngine { config, streams })
    }

    pub fn config(&self) -> &ImaginationConfig {
        &self.config
    }

    /// Deterministic mode: one rollout per stream, in stream order, appended
    /// to `buffer`. Returns the number of transitions appended.
    pub fn run_round(
        &mut self,
        env: &EnvSpec,
        q: &Mlp,
        model: &BackwardModel,
        buffer: &mut ReplayBuffer,
    ) -> Result<usize> {
        let mut appended = 0;
        for rng in &mut self.streams {
            for t in backward_rollout(env, &self.config, q, model, rng)? {
                buffer.append(t);
                appended += 1;
            }
        }
        Ok(appended)
    }

    /// Starts one thread per stream. Each thread loops until stopped: take
    /// the current snapshot, run a rollout, append it to `buffer`.
    pub fn spawn(
        self,
        env: EnvSpec,
        buffer: SharedReplayBuffer,
        snapshots: Arc<SnapshotCell>,
    ) -> AsyncStreams {
        let stop = Arc::new(AtomicBool::new(false));
        let appended = Arc::new(AtomicU64::new(0));
        let config = Arc::new(self.config);
        let handles = self
            .streams
            .into_iter()
            .map(|mut rng| {
                let (env, buffer, snapshots) = (env.clone(), buffer.clone(), snapshots.clone());
                let (stop, appended, config) = (stop.clone(), appended.clone(), config.clone());
                std::thread::spawn(move || -> Result<()> {
                    while !stop.load(Ordering::Relaxed) {
                        let snap = snapshots.current();
                        let rollout = backward_rollout(&env, &config, &snap.q, &snap.model, &mut rng)?;
                        let n = rollout.len() as u64;
                        buffer.append_all(rollout);
                        appended.fetch_add(n, Ordering::Relaxed);
                        std::thread::yield_now();
                    }
                    Ok(())
                })
            })
            .collect();
        AsyncStreams {
            stop,
            appended,
            handles,
        }
    }
}

/// Handle to running asynchronous streams.
#[derive(Debug)]
pub struct AsyncStreams {
    stop: Arc<AtomicBool>,
    appended: Arc<AtomicU64>,
    handles: Vec<JoinHandle<Result<()>>>,
}

impl AsyncStreams {
    pub fn appended(&self) -> u64 {
        self.appended.load(Ordering::Relaxed)
    }

    /// Stops every stream and waits for it; returns total transitions appended.
    pub fn stop(self) -> Result<u64> {
        self.stop.store(true, Ordering::Relaxed);
        for h in self.handles {
            h.join()
                .map_err(|_| Error::Training("imagination stream panicked".into()))??;
        }
        Ok(self.appended.load(Ordering::Relaxed))
    }
}
