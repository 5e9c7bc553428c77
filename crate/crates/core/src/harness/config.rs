//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # 15x15 Gridworld, forward-backward learner
//! env = gridworld
//! size = 15
//! method = fbrl
//! trials = 10
//! ```
//!
//! `env` and `size` are required; `method` defaults to `ddqn`. Every other key
//! overrides the published defaults for that environment and method. Unknown
//! or repeated keys are errors, as are imagination/model keys on a `ddqn` run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::AgentConfig;
use crate::backward::{BackwardModel, DeltaDecode};
use crate::env::{EnvKind, EnvSpec};
use crate::imagination::{ActionStrategy, ImaginationConfig};
use crate::nn::Optimizer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Double DQN baseline.
    Ddqn,
    /// Double DQN plus backward imagination.
    Fbrl,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ddqn => "ddqn",
            Method::Fbrl => "fbrl",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub decode: DeltaDecode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: BackwardModel::DEFAULT_HIDDEN,
            learning_rate: 1e-3,
            decode: DeltaDecode::Sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub agent: AgentConfig,
    /// `None` for the DDQN baseline.
    pub imagination: Option<ImaginationConfig>,
    pub model: ModelConfig,
    /// Feed the Q-network states scaled into `[0, 1]` rather than raw values.
    pub normalize_inputs: bool,
    pub trials: usize,
    pub total_episodes: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub output_path: PathBuf,
}

/// Epsilon decays over the first fifth of the nominal step budget.
fn default_decay_steps(total_episodes: usize, horizon: usize) -> u64 {
    (total_episodes as u64 * horizon as u64) / 5
}

impl ExperimentConfig {
    /// The published setup for one environment size and method.
    pub fn published(kind: EnvKind, size: usize, method: Method) -> Result<Self> {
        let environment = EnvSpec::new(kind, size, EnvSpec::published_horizon(kind, size))?;
        let (learning_rate, target_sync_period, total_episodes) = match (kind, method) {
            (EnvKind::Gridworld, Method::Ddqn) => (1e-3, 100, 500),
            (EnvKind::Gridworld, Method::Fbrl) => (5e-3, 100, 500),
            (EnvKind::Hanoi, Method::Ddqn) => (5e-4, 500, 1000),
            (EnvKind::Hanoi, Method::Fbrl) => (1e-4, 500, 1000),
        };
        let agent = AgentConfig {
            learning_rate,
            target_sync_period,
            epsilon_decay_steps: default_decay_steps(total_episodes, environment.horizon),
            ..AgentConfig::default()
        };
        let imagination = (method == Method::Fbrl).then(|| ImaginationConfig::for_env(kind));
        Ok(ExperimentConfig {
            environment,
            agent,
            imagination,
            model: ModelConfig::default(),
            trials: 10,
            total_episodes,
            seed: 0,
            normalize_inputs: true,
            deterministic: true,
            output_path: PathBuf::from(format!("results/{kind}{size}-{method}")),
        })
    }

    pub fn method(&self) -> Method {
        if self.imagination.is_some() {
            Method::Fbrl
        } else {
            Method::Ddqn
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.agent.validate()?;
        if let Some(im) = &self.imagination {
            im.validate()?;
            if self.model.hidden_dim == 0 || !(self.model.learning_rate > 0.0) {
                return Err(Error::Config("backward model needs positive width and rate".into()));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.total_episodes == 0 {
            return Err(Error::Config("total_episodes must be at least 1".into()));
        }
        if self.agent.warmup_samples < self.agent.batch_size {
            return Err(Error::Config(format!(
                "warmup_samples ({}) must cover one batch ({})",
                self.agent.warmup_samples, self.agent.batch_size
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", n + 1)));
            }
            if entries
                .insert(key.clone(), (n + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", n + 1)));
            }
        }
        let mut take = |key: &str| entries.remove(key);

        let kind: EnvKind = take("env")
            .ok_or_else(|| Error::Config("missing required key `env`".into()))?
            .1
            .parse()?;
        let size = parse_value("size", take("size").ok_or_else(|| {
            Error::Config("missing required key `size`".into())
        })?)?;
        let method = match take("method") {
            None => Method::Ddqn,
            Some((_, v)) if v == "ddqn" => Method::Ddqn,
            Some((_, v)) if v == "fbrl" => Method::Fbrl,
            Some((line, v)) => {
                return Err(Error::Config(format!("line {line}: unknown method {v:?}")))
            }
        };
        let mut cfg = Self::published(kind, size, method)?;
        let mut decay_given = false;

        if method == Method::Ddqn {
            if let Some(key) = entries.keys().find(|k| FBRL_ONLY.contains(&k.as_str())) {
                return Err(Error::Config(format!(
                    "`{key}` only applies to fbrl runs; the ddqn baseline has no imagination"
                )));
            }
        }

        // Applied after the strategy key, whatever their order in the file.
        let p_random = entries.remove("imagination_p_random");
        for (key, entry) in std::mem::take(&mut entries) {
            let env = &mut cfg.environment;
            let agent = &mut cfg.agent;
            match key.as_str() {
                "horizon" => env.horizon = parse_value(&key, entry)?,
                "step_cost" => env.step_cost = parse_value(&key, entry)?,
                "goal_reward" => env.goal_reward = parse_value(&key, entry)?,
                "gamma" => agent.gamma = parse_value(&key, entry)?,
                "epsilon_start" => agent.epsilon_start = parse_value(&key, entry)?,
                "epsilon_end" => agent.epsilon_end = parse_value(&key, entry)?,
                "epsilon_decay_steps" => {
                    agent.epsilon_decay_steps = parse_value(&key, entry)?;
                    decay_given = true;
                }
                "learning_rate" => agent.learning_rate = parse_value(&key, entry)?,
                "target_sync_period" => agent.target_sync_period = parse_value(&key, entry)?,
                "hidden_dim" => agent.hidden_dim = parse_value(&key, entry)?,
                "warmup_samples" => agent.warmup_samples = parse_value(&key, entry)?,
                "batch_size" => agent.batch_size = parse_value(&key, entry)?,
                "replay_capacity" => agent.replay_capacity = parse_value(&key, entry)?,
                "huber_delta" => agent.huber_delta = parse_value(&key, entry)?,
                "optimizer" => {
                    agent.optimizer = match entry.1.as_str() {
                        "adam" => Optimizer::ADAM,
                        "sgd" => Optimizer::Sgd,
                        other => return Err(bad_value(&key, entry.0, other)),
                    }
                }
                "imagination_steps" => {
                    imagination(&mut cfg.imagination).steps_per_rollout = parse_value(&key, entry)?
                }
                "imagination_streams" => {
                    imagination(&mut cfg.imagination).stream_count = parse_value(&key, entry)?
                }
                "imagination_strategy" => {
                    let im = imagination(&mut cfg.imagination);
                    let p = match im.strategy {
                        ActionStrategy::Mixed { p_random } => p_random,
                        _ => 0.5,
                    };
                    im.strategy = match entry.1.as_str() {
                        "random" => ActionStrategy::Random,
                        "greedy" => ActionStrategy::Greedy,
                        "mixed" => ActionStrategy::Mixed { p_random: p },
                        other => return Err(bad_value(&key, entry.0, other)),
                    }
                }
                "model_hidden_dim" => cfg.model.hidden_dim = parse_value(&key, entry)?,
                "model_learning_rate" => cfg.model.learning_rate = parse_value(&key, entry)?,
                "model_decode" => {
                    cfg.model.decode = match entry.1.as_str() {
                        "sample" => DeltaDecode::Sample,
                        "argmax" => DeltaDecode::Argmax,
                        other => return Err(bad_value(&key, entry.0, other)),
                    }
                }
                "trials" => cfg.trials = parse_value(&key, entry)?,
                "total_episodes" => cfg.total_episodes = parse_value(&key, entry)?,
                "seed" => cfg.seed = parse_value(&key, entry)?,
                "deterministic" => cfg.deterministic = parse_value(&key, entry)?,
                "normalize_inputs" => cfg.normalize_inputs = parse_value(&key, entry)?,
                "output" => cfg.output_path = PathBuf::from(entry.1),
                other => unreachable!("key {other} passed validation"),
            }
        }
        if let Some(entry) = p_random {
            let p: f64 = parse_value("imagination_p_random", entry)?;
            match &mut imagination(&mut cfg.imagination).strategy {
                ActionStrategy::Mixed { p_random } => *p_random = p,
                _ => {
                    return Err(Error::Config(
                        "imagination_p_random requires imagination_strategy = mixed".into(),
                    ))
                }
            }
        }
        if !decay_given {
            cfg.agent.epsilon_decay_steps =
                default_decay_steps(cfg.total_episodes, cfg.environment.horizon);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every key, so `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let env = &self.environment;
        let a = &self.agent;
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env", &env.kind);
        kv("size", &env.size);
        kv("method", &self.method());
        kv("horizon", &env.horizon);
        kv("step_cost", &env.step_cost);
        kv("goal_reward", &env.goal_reward);
        kv("gamma", &a.gamma);
        kv("epsilon_start", &a.epsilon_start);
        kv("epsilon_end", &a.epsilon_end);
        kv("epsilon_decay_steps", &a.epsilon_decay_steps);
        kv("learning_rate", &a.learning_rate);
        kv("target_sync_period", &a.target_sync_period);
        kv("hidden_dim", &a.hidden_dim);
        kv("warmup_samples", &a.warmup_samples);
        kv("batch_size", &a.batch_size);
        kv("replay_capacity", &a.replay_capacity);
        kv("huber_delta", &a.huber_delta);
        kv(
            "optimizer",
            &match a.optimizer {
                Optimizer::Sgd => "sgd",
                Optimizer::Adam { .. } => "adam",
            },
        );
        if let Some(im) = &self.imagination {
            kv("imagination_steps", &im.steps_per_rollout);
            kv("imagination_streams", &im.stream_count);
            match im.strategy {
                ActionStrategy::Random => kv("imagination_strategy", &"random"),
                ActionStrategy::Greedy => kv("imagination_strategy", &"greedy"),
                ActionStrategy::Mixed { p_random } => {
                    kv("imagination_strategy", &"mixed");
                    kv("imagination_p_random", &p_random);
                }
            }
            kv("model_hidden_dim", &self.model.hidden_dim);
            kv("model_learning_rate", &self.model.learning_rate);
            kv(
                "model_decode",
                &match self.model.decode {
                    DeltaDecode::Sample => "sample",
                    DeltaDecode::Argmax => "argmax",
                },
            );
        }
        kv("trials", &self.trials);
        kv("total_episodes", &self.total_episodes);
        kv("seed", &self.seed);
        kv("deterministic", &self.deterministic);
        kv("normalize_inputs", &self.normalize_inputs);
        kv("output", &self.output_path.display());
        s
    }
}

const KEYS: &[&str] = &[
    "env",
    "size",
    "method",
    "horizon",
    "step_cost",
    "goal_reward",
    "gamma",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_steps",
    "learning_rate",
    "target_sync_period",
    "hidden_dim",
    "warmup_samples",
    "batch_size",
    "replay_capacity",
    "huber_delta",
    "optimizer",
    "imagination_steps",
    "imagination_streams",
    "imagination_strategy",
    "imagination_p_random",
    "model_hidden_dim",
    "model_learning_rate",
    "model_decode",
    "trials",
    "total_episodes",
    "seed",
    "deterministic",
    "normalize_inputs",
    "output",
];

const FBRL_ONLY: &[&str] = &[
    "imagination_steps",
    "imagination_streams",
    "imagination_strategy",
    "imagination_p_random",
    "model_hidden_dim",
    "model_learning_rate",
    "model_decode",
];

fn imagination(slot: &mut Option<ImaginationConfig>) -> &mut ImaginationConfig {
    slot.as_mut().expect("fbrl-only keys are rejected for ddqn runs")
}

fn bad_value(key: &str, line: usize, value: &str) -> Error {
    Error::Config(format!("line {line}: invalid value {value:?} for `{key}`"))
}

fn parse_value<T: std::str::FromStr>(key: &str, (line, value): (usize, String)) -> Result<T> {
    value.parse().map_err(|_| bad_value(key, line, &value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_defaults() {
        let grid = ExperimentConfig::published(EnvKind::Gridworld, 20, Method::Fbrl).unwrap();
        assert_eq!(grid.environment.horizon, 200);
        assert_eq!(grid.agent.learning_rate, 5e-3);
        assert_eq!(grid.agent.target_sync_period, 100);
        assert_eq!(grid.agent.gamma, 0.99);
        assert_eq!(grid.agent.batch_size, 100);
        assert_eq!(grid.agent.warmup_samples, 10_000);
        assert_eq!(grid.agent.replay_capacity, 10_000);
        assert_eq!(grid.agent.epsilon_decay_steps, 20_000);
        assert_eq!(grid.imagination, Some(ImaginationConfig::gridworld()));

        let hanoi = ExperimentConfig::published(EnvKind::Hanoi, 3, Method::Ddqn).unwrap();
        assert_eq!(hanoi.environment.horizon, 100);
        assert_eq!(hanoi.environment.action_count(), 9);
        assert_eq!(hanoi.agent.learning_rate, 5e-4);
        assert_eq!(hanoi.agent.target_sync_period, 500);
        assert!(hanoi.imagination.is_none());
        let hanoi_fb = ExperimentConfig::published(EnvKind::Hanoi, 2, Method::Fbrl).unwrap();
        assert_eq!(hanoi_fb.agent.learning_rate, 1e-4);
        assert_eq!(hanoi_fb.imagination, Some(ImaginationConfig::hanoi()));
    }

    #[test]
    fn parse_overrides_and_recomputes_decay() {
        let cfg = ExperimentConfig::parse(
            "# comment\nenv = gridworld\nsize = 5\nmethod = fbrl\ntotal_episodes = 100 # inline\n\
             imagination_strategy = greedy\nseed = 42\n",
        )
        .unwrap();
        assert_eq!(cfg.total_episodes, 100);
        assert_eq!(cfg.agent.epsilon_decay_steps, 100 * 50 / 5);
        assert_eq!(cfg.imagination.unwrap().strategy, ActionStrategy::Greedy);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn text_roundtrip() {
        for (kind, size, method) in [
            (EnvKind::Gridworld, 7, Method::Fbrl),
            (EnvKind::Hanoi, 3, Method::Ddqn),
        ] {
            let mut cfg = ExperimentConfig::published(kind, size, method).unwrap();
            cfg.seed = 99;
            cfg.agent.optimizer = Optimizer::Sgd;
            assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        }
    }

    #[test]
    fn rejections() {
        let cases = [
            "size = 5",
            "env = gridworld",
            "env = gridworld\nsize = 5\nbogus = 1",
            "env = gridworld\nsize = 5\nsize = 6",
            "env = gridworld\nsize = 5\nimagination_steps = 3",
            "env = gridworld\nsize = 5\nmethod = sarsa",
            "env = gridworld\nsize = 5\ntrials = 0",
            "env = gridworld\nsize = 5\ngamma = 1.5",
            "env = gridworld\nsize = 1",
            "env = maze\nsize = 5",
            "env = gridworld\nsize = five",
            "env = gridworld\nsize = 5\nwarmup_samples = 10",
            "env = gridworld\nsize = 5\nmethod = fbrl\nimagination_strategy = greedy\nimagination_p_random = 0.2",
            "just some text",
        ];
        for text in cases {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(Error::Config(_))),
                "accepted: {text:?}"
            );
        }
    }
}
