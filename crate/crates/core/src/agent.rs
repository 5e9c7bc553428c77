//! Double DQN.
//!
//! The online network picks the bootstrap action at `s'` and the target
//! network evaluates it. The regression loss is Huber on the TD residual,
//! and only the online network is trained; the target is a periodic copy.

use rand::Rng;

use crate::env::{ActionId, StateVector};
use crate::nn::{argmax, huber_loss, LossValue, Mlp, Optimizer};
use crate::replay::{ReplayBuffer, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub epsilon_decay_steps: u64,
    pub learning_rate: f64,
    /// Learn steps between target synchronizations.
    pub target_sync_period: u64,
    pub hidden_dim: usize,
    /// Random-policy transitions collected before learning starts.
    pub warmup_samples: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub huber_delta: f64,
    pub optimizer: Optimizer,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_steps: 10_000,
            learning_rate: 1e-3,
            target_sync_period: 100,
            hidden_dim: 32,
            warmup_samples: 10_000,
            batch_size: 100,
            replay_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            huber_delta: 1.0,
            optimizer: Optimizer::ADAM,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma));
        }
        if !(0.0 <= self.epsilon_end
            && self.epsilon_end <= self.epsilon_start
            && self.epsilon_start <= 1.0)
        {
            return bad(format!(
                "need 0 <= epsilon_end ({}) <= epsilon_start ({}) <= 1",
                self.epsilon_end, self.epsilon_start
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if self.target_sync_period == 0 || self.hidden_dim == 0 || self.batch_size == 0 {
            return bad("target_sync_period, hidden_dim and batch_size must be positive".into());
        }
        if self.replay_capacity < self.batch_size {
            return bad(format!(
                "replay capacity {} smaller than batch size {}",
                self.replay_capacity, self.batch_size
            ));
        }
        if !(self.huber_delta > 0.0) {
            return bad(format!("huber delta {}", self.huber_delta));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone)]
pub struct DdqnAgent {
    online: Mlp,
    target: Mlp,
    config: AgentConfig,
    learn_steps: u64,
}

impl DdqnAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_count: usize,
        config: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let online = Mlp::new(state_dim, config.hidden_dim, action_count, rng)
            .with_optimizer(config.optimizer);
        Ok(Self::from_network(online, config))
    }

    /// Wraps an existing network; the target starts as a copy of it.
    pub fn from_network(online: Mlp, config: AgentConfig) -> Self {
        let online = online.with_optimizer(config.optimizer);
        DdqnAgent {
            target: online.clone(),
            online,
            config,
            learn_steps: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn action_count(&self) -> usize {
        self.online.output_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(state)
    }

    /// Epsilon-greedy action for environment step `step`.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        step: u64,
        rng: &mut R,
    ) -> Result<ActionId> {
        self.select_action_with_epsilon(state, self.config.epsilon(step), rng)
    }

    pub fn select_action_with_epsilon<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<ActionId> {
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            return Ok(ActionId(rng.random_range(0..self.action_count())));
        }
        Ok(ActionId(argmax(&self.q_values(state)?)))
    }

    /// `y = r` for terminal transitions, else
    /// `y = r + gamma * Q_target(s', argmax_a Q_online(s', a))`.
    pub fn td_targets<T: std::borrow::Borrow<Transition>>(&self, batch: &[T]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                let t = t.borrow();
                if t.terminal {
                    return Ok(t.reward);
                }
                let pick = argmax(&self.online.forward(&t.next_state)?);
                let value = self.target.forward(&t.next_state)?[pick];
                Ok(t.reward + self.config.gamma * value)
            })
            .collect()
    }

    /// One optimizer step on `batch`; returns the mean Huber TD loss.
    pub fn learn_on_batch<T: std::borrow::Borrow<Transition>>(&mut self, batch: &[T]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let targets = self.td_targets(batch)?;
        let delta = self.config.huber_delta;
        let actions: Vec<usize> = batch.iter().map(|t| t.borrow().action.0).collect();
        if let Some(&a) = actions.iter().find(|&&a| a >= self.action_count()) {
            return Err(Error::invalid(format!("action {a} out of range")));
        }
        let states: Vec<&[f64]> = batch.iter().map(|t| &t.borrow().state[..]).collect();
        let loss = self.online.fit_batch(&states, self.config.learning_rate, |i, q| {
            let a = actions[i];
            let l = huber_loss(&q[a..=a], &targets[i..=i], delta)?;
            let mut gradient = vec![0.0; q.len()];
            gradient[a] = l.gradient[0];
            Ok(LossValue {
                value: l.value,
                gradient,
            })
        })?;
        self.learn_steps += 1;
        if self.learn_steps % self.config.target_sync_period == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Samples a batch from `buffer` and learns from it.
    pub fn learn_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<f64> {
        let batch = buffer.sample(self.config.batch_size, rng)?;
        self.learn_on_batch(&batch)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_params_from(&self.online);
    }
}
