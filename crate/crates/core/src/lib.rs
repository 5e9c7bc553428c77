//! Forward-backward reinforcement learning.
//!
//! A Double DQN learner whose replay buffer is augmented with transitions
//! imagined *backwards* from known goal states. A learned reverse dynamics
//! model `b(s', a) -> delta` reconstructs predecessors `s = s' - delta`, and
//! short reverse rollouts from the goal spread the sparse goal reward into
//! the neighbourhood of the goal before the agent has ever visited it.
//!
//! Module map:
//!
//! - [`nn`]: two-layer ReLU networks, Huber and softmax cross-entropy losses,
//!   Adam/SGD, finite-difference gradient checking, binary checkpoints.
//! - [`env`]: Gridworld and Towers of Hanoi with a total reward query and a
//!   sampleable goal set.
//! - [`replay`]: bounded FIFO replay memory with uniform sampling.
//! - [`agent`]: the Double DQN learner.
//! - [`backward`]: continuous and categorical reverse dynamics models.
//! - [`imagination`]: reverse rollouts and imagination streams.
//! - [`harness`]: configs, training trials, multi-trial experiments, exact
//!   oracles, CSV output.

pub mod agent;
pub mod backward;
pub mod env;
mod error;
pub mod harness;
pub mod imagination;
pub mod nn;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
