//! Task environments with a queryable reward and a sampleable goal set.
//!
//! Both environments are deterministic. The reward depends only on the state
//! being entered, so the same function scores real and imagined transitions.

mod gridworld;
mod hanoi;

use std::fmt;
use std::ops::Deref;

use rand::Rng;

use crate::{Error, Result};

pub use hanoi::{decode_hanoi, encode_hanoi};

/// Fixed-length real vector encoding a state: `[x, y]` for Gridworld, three
/// one-hot bits per disc for Hanoi. Imagined states may hold arbitrary values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Gridworld action indices.
pub mod grid_action {
    use super::ActionId;
    pub const UP: ActionId = ActionId(0);
    pub const DOWN: ActionId = ActionId(1);
    pub const LEFT: ActionId = ActionId(2);
    pub const RIGHT: ActionId = ActionId(3);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Gridworld,
    Hanoi,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Gridworld => "gridworld",
            EnvKind::Hanoi => "hanoi",
        })
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gridworld" => Ok(EnvKind::Gridworld),
            "hanoi" => Ok(EnvKind::Hanoi),
            other => Err(Error::Config(format!("unknown environment {other:?}"))),
        }
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: StateVector,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Grid side length, or number of discs.
    pub size: usize,
    pub horizon: usize,
    pub step_cost: f64,
    pub goal_reward: f64,
}

impl EnvSpec {
    pub const STEP_COST: f64 = -0.01;
    pub const GOAL_REWARD: f64 = 1.0;

    pub fn new(kind: EnvKind, size: usize, horizon: usize) -> Result<Self> {
        let spec = EnvSpec {
            kind,
            size,
            horizon,
            step_cost: Self::STEP_COST,
            goal_reward: Self::GOAL_REWARD,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n x n` grid with the published horizon `10 n`.
    pub fn gridworld(n: usize) -> Self {
        Self::new(EnvKind::Gridworld, n, Self::published_horizon(EnvKind::Gridworld, n))
            .expect("grid side must be at least 2")
    }

    /// `n`-disc Hanoi with the published horizon (50 for two discs, 100 for three).
    pub fn hanoi(n: usize) -> Self {
        Self::new(EnvKind::Hanoi, n, Self::published_horizon(EnvKind::Hanoi, n))
            .expect("between 2 and 12 discs")
    }

    pub fn published_horizon(kind: EnvKind, size: usize) -> usize {
        match kind {
            EnvKind::Gridworld => 10 * size,
            EnvKind::Hanoi => 50 * size.saturating_sub(1).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::Config(format!("size must be at least 2, got {}", self.size)));
        }
        if self.kind == EnvKind::Hanoi && self.size > 12 {
            return Err(Error::Config(format!("{} discs is too many", self.size)));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !self.step_cost.is_finite() || !self.goal_reward.is_finite() {
            return Err(Error::Config("rewards must be finite".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            EnvKind::Gridworld => 2,
            EnvKind::Hanoi => 3 * self.size,
        }
    }

    pub fn action_count(&self) -> usize {
        match self.kind {
            EnvKind::Gridworld => 4,
            EnvKind::Hanoi => 3 * self.size,
        }
    }

    /// Range every state variable is clipped to when imagining predecessors.
    pub fn value_range(&self) -> (f64, f64) {
        match self.kind {
            EnvKind::Gridworld => (0.0, (self.size - 1) as f64),
            EnvKind::Hanoi => (0.0, 1.0),
        }
    }

    /// Per-variable factor that maps the value range onto `[0, 1]`.
    pub fn input_scale(&self) -> Vec<f64> {
        let (lo, hi) = self.value_range();
        debug_assert_eq!(lo, 0.0);
        vec![1.0 / hi; self.state_dim()]
    }

    pub fn reset(&self) -> StateVector {
        match self.kind {
            EnvKind::Gridworld => StateVector(vec![0.0, 0.0]),
            EnvKind::Hanoi => encode_hanoi(&vec![1; self.size], self.size).expect("valid pillars"),
        }
    }

    /// Goal predicate. Accepts any vector; only exact goal states satisfy it.
    pub fn is_goal(&self, state: &[f64]) -> bool {
        if state.len() != self.state_dim() {
            return false;
        }
        match self.kind {
            EnvKind::Gridworld => gridworld::is_goal(self.size, state),
            EnvKind::Hanoi => hanoi::is_goal(state),
        }
    }

    /// Reward for entering `state`. Total: any vector, valid or not, gets a value.
    pub fn reward(&self, state: &[f64]) -> f64 {
        if self.is_goal(state) {
            self.goal_reward
        } else {
            self.step_cost
        }
    }

    /// Draws from the goal distribution (a single state for both tasks).
    pub fn sample_goal<R: Rng + ?Sized>(&self, _rng: &mut R) -> StateVector {
        self.goal()
    }

    pub fn goal(&self) -> StateVector {
        match self.kind {
            EnvKind::Gridworld => {
                let far = (self.size - 1) as f64;
                StateVector(vec![far, far])
            }
            EnvKind::Hanoi => encode_hanoi(&vec![3; self.size], self.size).expect("valid pillars"),
        }
    }

    /// Whether `state` satisfies the invariants of a reachable, real state.
    pub fn is_valid_state(&self, state: &[f64]) -> bool {
        if state.len() != self.state_dim() {
            return false;
        }
        match self.kind {
            EnvKind::Gridworld => gridworld::cell(self.size, state).is_some(),
            EnvKind::Hanoi => decode_hanoi(state).is_some(),
        }
    }

    pub fn step(&self, state: &[f64], action: ActionId) -> Result<Step> {
        if action.0 >= self.action_count() {
            return Err(Error::invalid(format!(
                "action {} out of range for {} actions",
                action.0,
                self.action_count()
            )));
        }
        let next = match self.kind {
            EnvKind::Gridworld => gridworld::step(self.size, state, action)?,
            EnvKind::Hanoi => hanoi::step(self.size, state, action)?,
        };
        let reward = self.reward(&next);
        let terminal = self.is_goal(&next);
        Ok(Step {
            next,
            reward,
            terminal,
        })
    }

    /// Every real state, in a fixed order. Used by the exact oracles.
    pub fn enumerate_states(&self) -> Vec<StateVector> {
        match self.kind {
            EnvKind::Gridworld => {
                let n = self.size;
                (0..n)
                    .flat_map(|y| (0..n).map(move |x| StateVector(vec![x as f64, y as f64])))
                    .collect()
            }
            EnvKind::Hanoi => hanoi::enumerate(self.size),
        }
    }
}
