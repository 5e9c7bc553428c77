//! One training run: warmup collection, then episodic forward learning with
//! (for the forward-backward method) reverse-model training and imagination.

use std::sync::Arc;

use crate::agent::DdqnAgent;
use crate::backward::BackwardModel;
use crate::env::EnvSpec;
use crate::nn::Mlp;
use crate::imagination::{ImaginationEngine, Snapshot, SnapshotCell};
use crate::replay::{SharedReplayBuffer, Transition};
use crate::rng::{substream, Substream, TrialRng};
use crate::Result;

use rand::Rng;

use super::config::ExperimentConfig;

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trial: usize,
    pub episode: usize,
    /// Undiscounted return.
    pub ret: f64,
    /// Environment steps taken after warmup, including this episode.
    pub env_steps: u64,
    /// Exploration rate at the end of the episode.
    pub epsilon: f64,
    /// Mean TD loss over the episode's learn steps.
    pub td_loss: f64,
    /// Mean reverse-model loss, absent for the baseline.
    pub backward_loss: Option<f64>,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub records: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ret).collect()
    }

    /// Mean return over the last `window` episodes.
    pub fn final_mean(&self, window: usize) -> f64 {
        let n = self.records.len();
        let tail = &self.records[n.saturating_sub(window)..];
        tail.iter().map(|r| r.ret).sum::<f64>() / tail.len().max(1) as f64
    }

    /// Index of the first episode that reached the goal.
    pub fn first_success(&self) -> Option<usize> {
        self.records.iter().position(|r| r.reached_goal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub curve: LearningCurve,
    /// Environment steps after warmup.
    pub forward_steps: u64,
    pub warmup_steps: u64,
    pub imagined_transitions: u64,
}

/// Seed used by trial `trial` of an experiment rooted at `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

/// Random-policy episodes until `samples` real transitions are stored.
fn collect_warmup(env: &EnvSpec, samples: usize, buffer: &SharedReplayBuffer, rng: &mut TrialRng) -> Result<u64> {
    let mut collected = 0;
    while collected < samples {
        let mut s = env.reset();
        for _ in 0..env.horizon {
            let a = crate::env::ActionId(rng.random_range(0..env.action_count()));
            let step = env.step(&s, a)?;
            buffer.append(Transition {
                state: s,
                action: a,
                reward: step.reward,
                next_state: step.next.clone(),
                terminal: step.terminal,
                imagined: false,
            });
            collected += 1;
            s = step.next;
            if step.terminal || collected == samples {
                break;
            }
        }
    }
    Ok(collected as u64)
}

/// Runs trial `trial` of `config` with seed `config.seed + trial`.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    config.validate()?;
    let seed = trial_seed(config.seed, trial);
    let env = &config.environment;
    let cfg = &config.agent;

    let mut q = Mlp::new(
        env.state_dim(),
        cfg.hidden_dim,
        env.action_count(),
        &mut substream(seed, Substream::QInit),
    );
    if config.normalize_inputs {
        q = q.with_input_scale(env.input_scale())?;
    }
    let mut agent = DdqnAgent::from_network(q, cfg.clone());
    let mut model = match &config.imagination {
        Some(_) => Some(
            BackwardModel::for_env(
                env,
                config.model.hidden_dim,
                config.model.learning_rate,
                &mut substream(seed, Substream::ModelInit),
            )?
            .with_decode(config.model.decode),
        ),
        None => None,
    };
    let mut engine = match &config.imagination {
        Some(im) => Some(ImaginationEngine::new(im.clone(), seed)?),
        None => None,
    };

    let buffer = SharedReplayBuffer::new(cfg.replay_capacity);
    let mut env_rng = substream(seed, Substream::Env);
    let mut agent_rng = substream(seed, Substream::Agent);
    let mut replay_rng = substream(seed, Substream::Replay);
    let mut model_rng = substream(seed, Substream::ModelReplay);

    let warmup_steps = collect_warmup(env, cfg.warmup_samples, &buffer, &mut env_rng)?;

    // Asynchronous mode: streams run on their own threads against snapshots.
    let mut async_state = None;
    if !config.deterministic {
        if let (Some(engine), Some(model)) = (engine.take(), model.as_ref()) {
            let cell = Arc::new(SnapshotCell::new(Snapshot {
                q: agent.online().clone(),
                model: model.clone(),
            }));
            let streams = engine.spawn(env.clone(), buffer.clone(), cell.clone());
            async_state = Some((cell, streams));
        }
    }

    let mut records = Vec::with_capacity(config.total_episodes);
    let mut steps: u64 = 0;
    let mut imagined: u64 = 0;
    let outcome = (|| -> Result<()> {
        for episode in 0..config.total_episodes {
            let mut s = env.reset();
            let mut ret = 0.0;
            let mut reached_goal = false;
            let (mut td_sum, mut td_n) = (0.0, 0usize);
            let (mut bw_sum, mut bw_n) = (0.0, 0usize);
            for _ in 0..env.horizon {
                let a = agent.select_action(&s, steps, &mut agent_rng)?;
                let step = env.step(&s, a)?;
                ret += step.reward;
                buffer.append(Transition {
                    state: s,
                    action: a,
                    reward: step.reward,
                    next_state: step.next.clone(),
                    terminal: step.terminal,
                    imagined: false,
                });
                steps += 1;

                td_sum += buffer.with(|b| agent.learn_step(b, &mut replay_rng))?;
                td_n += 1;

                if let Some(model) = model.as_mut() {
                    let loss = buffer.with(|b| -> Result<Option<f64>> {
                        if b.real_len() < cfg.batch_size {
                            return Ok(None);
                        }
                        let batch = b.sample_real(cfg.batch_size, &mut model_rng)?;
                        Ok(Some(model.train(&batch)?))
                    })?;
                    if let Some(l) = loss {
                        bw_sum += l;
                        bw_n += 1;
                    }
                    if let Some(engine) = engine.as_mut() {
                        imagined += buffer
                            .with(|b| engine.run_round(env, agent.online(), model, b))?
                            as u64;
                    } else if let Some((cell, _)) = &async_state {
                        if agent.learn_steps() % cfg.target_sync_period == 0 {
                            cell.publish(Snapshot {
                                q: agent.online().clone(),
                                model: model.clone(),
                            });
                        }
                    }
                }

                s = step.next;
                if step.terminal {
                    reached_goal = true;
                    break;
                }
            }
            records.push(EpisodeRecord {
                trial,
                episode,
                ret,
                env_steps: steps,
                epsilon: cfg.epsilon(steps),
                td_loss: td_sum / td_n.max(1) as f64,
                backward_loss: (bw_n > 0).then(|| bw_sum / bw_n as f64),
                reached_goal,
            });
        }
        Ok(())
    })();

    if let Some((_, streams)) = async_state {
        imagined += streams.stop()?;
    }
    outcome?;

    Ok(TrialResult {
        trial,
        curve: LearningCurve { records },
        forward_steps: steps,
        warmup_steps,
        imagined_transitions: imagined,
    })
}
