//! Repeated-run comparisons over component sets and fusion strategies.

use serde::{Deserialize, Serialize};

use super::trainer::{evaluate, train};
use crate::config::{Components, FusionStrategy, ModelConfig};
use crate::error::{Error, Result};
use crate::store::{FeatureDims, NewsVideoSample};

/// Train/validation/test samples for one experiment.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a [NewsVideoSample],
    pub val: &'a [NewsVideoSample],
    pub test: &'a [NewsVideoSample],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub runs: Vec<RunScore>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Summary {
    fn from_runs(runs: Vec<RunScore>) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        let f1: Vec<f64> = runs.iter().map(|r| r.macro_f1).collect();
        let (acc_mean, acc_std) = mean_std(&acc);
        let (f1_mean, f1_std) = mean_std(&f1);
        Self {
            acc_mean,
            acc_std,
            f1_mean,
            f1_std,
            runs,
        }
    }
}

/// Trains `runs` models with seeds `seed, seed+1, …` and scores each on the
/// test split.
pub fn repeated_runs(config: &ModelConfig, dims: &FeatureDims, splits: Splits, runs: usize) -> Result<Summary> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let scores = (0..runs as u64)
        .map(|k| {
            let cfg = ModelConfig {
                seed: config.seed.wrapping_add(k),
                ..config.clone()
            };
            let seed = cfg.seed;
            let outcome = train(cfg, dims.clone(), splits.train, splits.val)?;
            let report = evaluate(&outcome.model, splits.test)?;
            Ok(RunScore {
                seed,
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary::from_runs(scores))
}

/// Full set, each branch alone, then each component removed in turn.
pub fn ablation_sets(base: Components) -> Result<Vec<Components>> {
    if base.is_empty() {
        return Err(Error::InvalidArgument("component set is empty".into()));
    }
    let mut sets = vec![base];
    let selection = Components {
        spa: false,
        tem: false,
        ..base
    };
    let editing = Components {
        sen: false,
        sem: false,
        ..base
    };
    let drops = [
        Components { sen: false, ..base },
        Components { sem: false, ..base },
        Components { spa: false, ..base },
        Components { tem: false, ..base },
    ];
    for c in [selection, editing].into_iter().chain(drops) {
        if !c.is_empty() && !sets.contains(&c) {
            sets.push(c);
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub components: Components,
    pub summary: Summary,
}

pub fn run_ablation(config: &ModelConfig, dims: &FeatureDims, splits: Splits, base: Components, runs: usize) -> Result<Vec<AblationRow>> {
    ablation_sets(base)?
        .into_iter()
        .map(|components| {
            log::info!("ablation row {}", components.label());
            let cfg = ModelConfig {
                components,
                ..config.clone()
            };
            Ok(AblationRow {
                components,
                summary: repeated_runs(&cfg, dims, splits, runs)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub fusion: FusionStrategy,
    pub summary: Summary,
}

pub fn run_fusion_bench(config: &ModelConfig, dims: &FeatureDims, splits: Splits, runs: usize) -> Result<Vec<FusionRow>> {
    FusionStrategy::ALL
        .into_iter()
        .map(|fusion| {
            log::info!("fusion strategy {fusion}");
            let cfg = ModelConfig {
                fusion,
                ..config.clone()
            };
            Ok(FusionRow {
                fusion,
                summary: repeated_runs(&cfg, dims, splits, runs)?,
            })
        })
        .collect()
}

fn mark(on: bool) -> &'static str {
    if on {
        "x"
    } else {
        ""
    }
}

pub fn write_ablation_csv(rows: &[AblationRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["SEN", "SEM", "SPA", "TEM", "acc_mean", "acc_std", "f1_mean", "f1_std", "runs"])?;
    for r in rows {
        let c = r.components;
        let s = &r.summary;
        w.write_record([
            mark(c.sen).to_string(),
            mark(c.sem).to_string(),
            mark(c.spa).to_string(),
            mark(c.tem).to_string(),
            format!("{:.6}", s.acc_mean),
            format!("{:.6}", s.acc_std),
            format!("{:.6}", s.f1_mean),
            format!("{:.6}", s.f1_std),
            s.runs.len().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_fusion_csv(rows: &[FusionRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fusion", "acc_mean", "acc_std", "f1_mean", "f1_std", "runs"])?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            r.fusion.to_string(),
            format!("{:.6}", s.acc_mean),
            format!("{:.6}", s.acc_std),
            format!("{:.6}", s.f1_mean),
            format!("{:.6}", s.f1_std),
            s.runs.len().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
