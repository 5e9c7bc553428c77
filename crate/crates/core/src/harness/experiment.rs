//! Multi-trial experiments, CSV output and summary metrics.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::trial::{run_trial, EpisodeRecord, TrialResult};
use crate::{Error, Result};

/// Episodes averaged by [`ExperimentResult::final_means`].
pub const FINAL_WINDOW: usize = 50;

pub const RAW_HEADER: [&str; 7] = [
    "trial",
    "episode",
    "return",
    "env_steps",
    "epsilon",
    "td_loss",
    "backward_loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub episode: usize,
    pub mean: f64,
    /// Standard error of the mean across trials; zero for a single trial.
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
}

impl ExperimentResult {
    /// Per-episode mean and standard error across trials.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let curves: Vec<Vec<f64>> = self.trials.iter().map(|t| t.curve.returns()).collect();
        summarize(&curves)
    }

    pub fn final_means(&self, window: usize) -> Vec<f64> {
        self.trials.iter().map(|t| t.curve.final_mean(window)).collect()
    }

    /// Area under the mean learning curve (sum of per-episode means).
    pub fn auc(&self) -> f64 {
        self.summary().iter().map(|r| r.mean).sum()
    }

    /// First goal episode per trial; trials that never succeed count as the
    /// episode budget.
    pub fn first_success_episodes(&self) -> Vec<usize> {
        self.trials
            .iter()
            .map(|t| t.curve.first_success().unwrap_or(t.curve.records.len()))
            .collect()
    }

    pub fn median_first_success(&self) -> f64 {
        median(&self.first_success_episodes().iter().map(|&e| e as f64).collect::<Vec<_>>())
    }

    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.trials.iter().flat_map(|t| t.curve.records.iter())
    }
}

/// Per-index mean and standard error over equal-length curves.
pub fn summarize(curves: &[Vec<f64>]) -> Vec<SummaryRow> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let n = curves.len() as f64;
    (0..len)
        .map(|e| {
            let mean = curves.iter().map(|c| c[e]).sum::<f64>() / n;
            let stderr = if curves.len() > 1 {
                let var = curves.iter().map(|c| (c[e] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                episode: e,
                mean,
                stderr,
            }
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Runs every trial. Trials are independent and run in parallel; results are
/// ordered by trial index, so output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            run_trial(config, i).map_err(|e| Error::Trial {
                trial: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { trials })
}

/// Writes `raw.csv`, `summary.csv` and `config.txt` into `dir`.
pub fn write_results(dir: &Path, config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut raw = csv::Writer::from_path(dir.join("raw.csv"))?;
    raw.write_record(RAW_HEADER)?;
    for r in result.records() {
        raw.write_record([
            r.trial.to_string(),
            r.episode.to_string(),
            r.ret.to_string(),
            r.env_steps.to_string(),
            r.epsilon.to_string(),
            r.td_loss.to_string(),
            r.backward_loss.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    raw.flush()?;

    let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
    summary.write_record(["episode", "mean_return", "stderr"])?;
    for row in result.summary() {
        summary.write_record([row.episode.to_string(), row.mean.to_string(), row.stderr.to_string()])?;
    }
    summary.flush()?;

    fs::write(dir.join("config.txt"), config.to_text())?;
    Ok(())
}
