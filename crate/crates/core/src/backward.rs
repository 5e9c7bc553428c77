//! Learned reverse dynamics.
//!
//! The model sees `(s', a)` (the state concatenated with a one-hot action)
//! and predicts the change `delta = s' - s` the action produced, so the
//! predecessor is reconstructed as `s = s' - delta`. Predicting the change
//! rather than the previous state keeps outputs centred near zero.
//!
//! Two heads are supported. The continuous head regresses `delta` with a
//! Huber loss. The categorical head emits three logits per state variable
//! for `delta` in `{-1, 0, +1}` and trains with summed cross-entropy.

use rand::Rng;

use crate::env::{ActionId, EnvKind, EnvSpec, StateVector};
use crate::nn::{huber_loss, LossValue, Mlp, Optimizer};
use crate::replay::Transition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVariant {
    Continuous,
    Categorical,
}

/// How a categorical prediction is turned into a concrete delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaDecode {
    #[default]
    Sample,
    Argmax,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaPrediction {
    Continuous(Vec<f64>),
    /// Per variable, probabilities of `delta = -1, 0, +1`.
    Categorical(Vec<[f64; 3]>),
}

impl DeltaPrediction {
    /// Concrete delta: the vector itself, or one class per variable chosen by `decode`.
    pub fn realize<R: Rng + ?Sized>(&self, decode: DeltaDecode, rng: &mut R) -> Vec<f64> {
        match self {
            DeltaPrediction::Continuous(d) => d.clone(),
            DeltaPrediction::Categorical(probs) => probs
                .iter()
                .map(|p| {
                    let class = match decode {
                        DeltaDecode::Argmax => crate::nn::argmax(p),
                        DeltaDecode::Sample => sample_class(p, rng),
                    };
                    class as f64 - 1.0
                })
                .collect(),
        }
    }
}

fn sample_class<R: Rng + ?Sized>(p: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < p[0] {
        0
    } else if u < p[0] + p[1] {
        1
    } else {
        2
    }
}

/// Elementwise `next_state - state`.
pub fn compute_delta(transition: &Transition) -> Vec<f64> {
    transition
        .next_state
        .iter()
        .zip(transition.state.iter())
        .map(|(n, s)| n - s)
        .collect()
}

#[derive(Debug, Clone)]
pub struct BackwardModel {
    net: Mlp,
    variant: DeltaVariant,
    decode: DeltaDecode,
    learning_rate: f64,
    state_dim: usize,
    action_count: usize,
    clip: (f64, f64),
    huber_delta: f64,
}

impl BackwardModel {
    /// Hidden width of the published reverse-model architectures.
    pub const DEFAULT_HIDDEN: usize = 100;

    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_count: usize,
        hidden_dim: usize,
        variant: DeltaVariant,
        clip: (f64, f64),
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let out = match variant {
            DeltaVariant::Continuous => state_dim,
            DeltaVariant::Categorical => 3 * state_dim,
        };
        let net = Mlp::new(state_dim + action_count, hidden_dim, out, rng);
        Self::from_network(net, state_dim, action_count, variant, clip, learning_rate)
    }

    /// Continuous head for Gridworld, categorical head for Hanoi.
    pub fn for_env<R: Rng + ?Sized>(
        env: &EnvSpec,
        hidden_dim: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let variant = match env.kind {
            EnvKind::Gridworld => DeltaVariant::Continuous,
            EnvKind::Hanoi => DeltaVariant::Categorical,
        };
        Self::new(
            env.state_dim(),
            env.action_count(),
            hidden_dim,
            variant,
            env.value_range(),
            learning_rate,
            rng,
        )
    }

    pub fn from_network(
        net: Mlp,
        state_dim: usize,
        action_count: usize,
        variant: DeltaVariant,
        clip: (f64, f64),
        learning_rate: f64,
    ) -> Result<Self> {
        let expected_out = match variant {
            DeltaVariant::Continuous => state_dim,
            DeltaVariant::Categorical => 3 * state_dim,
        };
        if net.input_dim() != state_dim + action_count || net.output_dim() != expected_out {
            return Err(Error::invalid(format!(
                "network {}->{} does not fit state {state_dim}, actions {action_count}, {variant:?}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if !(clip.0 <= clip.1) {
            return Err(Error::invalid(format!("clip range {clip:?}")));
        }
        if !(learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning rate {learning_rate}")));
        }
        Ok(BackwardModel {
            net,
            variant,
            decode: DeltaDecode::default(),
            learning_rate,
            state_dim,
            action_count,
            clip,
            huber_delta: 1.0,
        })
    }

    pub fn with_decode(mut self, decode: DeltaDecode) -> Self {
        self.decode = decode;
        self
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.net = self.net.with_optimizer(optimizer);
        self
    }

    pub fn variant(&self) -> DeltaVariant {
        self.variant
    }

    pub fn decode(&self) -> DeltaDecode {
        self.decode
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    fn input(&self, next_state: &[f64], action: ActionId) -> Result<Vec<f64>> {
        if next_state.len() != self.state_dim {
            return Err(Error::invalid(format!(
                "state of length {}, model expects {}",
                next_state.len(),
                self.state_dim
            )));
        }
        if action.0 >= self.action_count {
            return Err(Error::invalid(format!("action {action} out of range")));
        }
        let mut x = Vec::with_capacity(self.state_dim + self.action_count);
        x.extend_from_slice(next_state);
        x.extend((0..self.action_count).map(|a| if a == action.0 { 1.0 } else { 0.0 }));
        Ok(x)
    }

    pub fn predict(&self, next_state: &[f64], action: ActionId) -> Result<DeltaPrediction> {
        let out = self.net.forward(&self.input(next_state, action)?)?;
        Ok(match self.variant {
            DeltaVariant::Continuous => DeltaPrediction::Continuous(out),
            DeltaVariant::Categorical => DeltaPrediction::Categorical(
                out.chunks_exact(3)
                    .map(|logits| {
                        let p = crate::nn::softmax(logits);
                        [p[0], p[1], p[2]]
                    })
                    .collect(),
            ),
        })
    }

    /// `s' - delta`, clipped to the environment's value range.
    pub fn predict_previous<R: Rng + ?Sized>(
        &self,
        next_state: &[f64],
        action: ActionId,
        rng: &mut R,
    ) -> Result<StateVector> {
        let delta = self.predict(next_state, action)?.realize(self.decode, rng);
        Ok(self.reconstruct(next_state, &delta))
    }

    pub fn reconstruct(&self, next_state: &[f64], delta: &[f64]) -> StateVector {
        let (lo, hi) = self.clip;
        StateVector(
            next_state
                .iter()
                .zip(delta)
                .map(|(s, d)| (s - d).clamp(lo, hi))
                .collect(),
        )
    }

    /// One optimizer step on real transitions; returns the mean loss.
    pub fn train<T: std::borrow::Borrow<Transition>>(&mut self, batch: &[T]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            let t = t.borrow();
            assert!(!t.imagined, "backward model must only train on real transitions");
            inputs.push(self.input(&t.next_state, t.action)?);
            let delta = compute_delta(t);
            if self.variant == DeltaVariant::Categorical {
                targets.push(delta_classes(&delta)?);
            } else {
                targets.push(delta);
            }
        }
        let huber_delta = self.huber_delta;
        let variant = self.variant;
        self.net.fit_batch(&inputs, self.learning_rate, |i, out| match variant {
            DeltaVariant::Continuous => huber_loss(out, &targets[i], huber_delta),
            DeltaVariant::Categorical => {
                let classes: Vec<usize> = targets[i].iter().map(|&c| c as usize).collect();
                crate::nn::grouped_cross_entropy(out, &classes)
            }
        })
    }

    /// Mean loss over `batch` without updating parameters.
    pub fn evaluate<T: std::borrow::Borrow<Transition>>(&self, batch: &[T]) -> Result<f64> {
        let mut total = 0.0;
        for t in batch {
            let t = t.borrow();
            let out = self.net.forward(&self.input(&t.next_state, t.action)?)?;
            let delta = compute_delta(t);
            let l: LossValue = match self.variant {
                DeltaVariant::Continuous => huber_loss(&out, &delta, self.huber_delta)?,
                DeltaVariant::Categorical => {
                    let classes: Vec<usize> =
                        delta_classes(&delta)?.iter().map(|&c| c as usize).collect();
                    crate::nn::grouped_cross_entropy(&out, &classes)?
                }
            };
            total += l.value;
        }
        Ok(total / batch.len().max(1) as f64)
    }
}

/// Maps each delta in `{-1, 0, +1}` to class `{0, 1, 2}`.
fn delta_classes(delta: &[f64]) -> Result<Vec<f64>> {
    delta
        .iter()
        .map(|&d| match d {
            d if d == -1.0 => Ok(0.0),
            d if d == 0.0 => Ok(1.0),
            d if d == 1.0 => Ok(2.0),
            other => Err(Error::invalid(format!(
                "categorical model cannot represent delta {other}"
            ))),
        })
        .collect()
}
