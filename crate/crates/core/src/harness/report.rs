//! Reading results back for comparison and plotting.

use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{summarize, SummaryRow, FINAL_WINDOW};
use crate::{Error, Result};

/// Per-trial return curves loaded from a `raw.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub curves: Vec<Vec<f64>>,
}

impl LoadedRun {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.curves)
    }

    pub fn auc(&self) -> f64 {
        self.summary().iter().map(|r| r.mean).sum()
    }

    /// Mean over trials of each trial's final-window mean.
    pub fn final_mean(&self, window: usize) -> f64 {
        let per: Vec<f64> = self
            .curves
            .iter()
            .map(|c| {
                let tail = &c[c.len().saturating_sub(window)..];
                tail.iter().sum::<f64>() / tail.len().max(1) as f64
            })
            .collect();
        per.iter().sum::<f64>() / per.len().max(1) as f64
    }
}

/// Accepts a results directory or a path to `raw.csv`.
pub fn load_raw(path: &Path) -> Result<LoadedRun> {
    let file = if path.is_dir() { path.join("raw.csv") } else { path.to_path_buf() };
    let mut reader = csv::Reader::from_path(&file)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing column {name}", file.display())))
    };
    let (ti, ei, ri) = (col("trial")?, col("episode")?, col("return")?);
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse_err = |what: &str| Error::InvalidInput(format!("{}: row {}: bad {what}", file.display(), line + 2));
        let trial: usize = rec[ti].parse().map_err(|_| parse_err("trial"))?;
        let episode: usize = rec[ei].parse().map_err(|_| parse_err("episode"))?;
        let ret: f64 = rec[ri].parse().map_err(|_| parse_err("return"))?;
        if curves.len() <= trial {
            curves.resize(trial + 1, Vec::new());
        }
        if curves[trial].len() != episode {
            return Err(parse_err("episode order"));
        }
        curves[trial].push(ret);
    }
    if curves.is_empty() || curves.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("{}: no complete trials", file.display())));
    }
    Ok(LoadedRun { curves })
}

/// Text comparison of two runs: headline metrics, then per-episode means.
pub fn compare(a: &LoadedRun, b: &LoadedRun) -> String {
    let (sa, sb) = (a.summary(), b.summary());
    let mut out = String::new();
    let _ = writeln!(out, "metric\ta\tb\tb-a");
    let _ = writeln!(out, "trials\t{}\t{}\t", a.curves.len(), b.curves.len());
    let (fa, fb) = (a.final_mean(FINAL_WINDOW), b.final_mean(FINAL_WINDOW));
    let _ = writeln!(out, "final{FINAL_WINDOW}\t{fa:.4}\t{fb:.4}\t{:.4}", fb - fa);
    let (aa, ab) = (a.auc(), b.auc());
    let _ = writeln!(out, "auc\t{aa:.4}\t{ab:.4}\t{:.4}", ab - aa);
    let _ = writeln!(out, "\nepisode\tmean_a\tmean_b\tdiff");
    for (ra, rb) in sa.iter().zip(&sb) {
        let _ = writeln!(out, "{}\t{:.4}\t{:.4}\t{:.4}", ra.episode, ra.mean, rb.mean, rb.mean - ra.mean);
    }
    out
}

/// Whitespace-separated `episode mean lower upper` rows, one standard error
/// either side, for gnuplot and similar tools.
pub fn plot_data(run: &LoadedRun) -> String {
    let mut out = String::from("# episode mean lower upper\n");
    for r in run.summary() {
        let _ = writeln!(out, "{} {} {} {}", r.episode, r.mean, r.mean - r.stderr, r.mean + r.stderr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, body: &str) {
        std::fs::write(dir.join("raw.csv"), body).unwrap();
    }

    #[test]
    fn load_and_compare() {
        let d = tempfile::tempdir().unwrap();
        write(
            d.path(),
            "trial,episode,return,env_steps,epsilon,td_loss,backward_loss\n\
             0,0,1,1,1,0,\n0,1,3,2,1,0,\n1,0,3,1,1,0,\n1,1,5,2,1,0,\n",
        );
        let run = load_raw(d.path()).unwrap();
        assert_eq!(run.curves, vec![vec![1.0, 3.0], vec![3.0, 5.0]]);
        assert_eq!(run.auc(), 6.0);
        assert_eq!(run.final_mean(1), 4.0);
        let text = compare(&run, &run);
        assert!(text.contains("auc\t6.0000\t6.0000\t0.0000"));
        let plot = plot_data(&run);
        assert_eq!(plot.lines().nth(1).unwrap(), "0 2 1 3");
    }

    #[test]
    fn rejects_malformed() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "trial,episode\n0,0\n");
        assert!(load_raw(d.path()).is_err());
        write(d.path(), "trial,episode,return\n0,1,1.0\n");
        assert!(load_raw(d.path()).is_err());
        write(d.path(), "trial,episode,return\n0,0,x\n");
        assert!(load_raw(d.path()).is_err());
        assert!(load_raw(&d.path().join("missing")).is_err());
    }
}
