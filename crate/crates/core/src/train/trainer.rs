use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::total_loss;
use super::metrics::{EvalReport, PredictionRecord};
use super::optim::Adam;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::Detector;
use crate::store::{FeatureDims, NewsVideoSample};
use crate::tape::{Grads, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: Detector,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub stopped_early: bool,
}

/// Mixes a seed with two counters into an independent stream seed.
pub fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn evaluate(model: &Detector, samples: &[NewsVideoSample]) -> Result<EvalReport> {
    let predictions = samples
        .iter()
        .map(|s| {
            let p = model.predict(s)?;
            Ok(PredictionRecord {
                id: s.id.clone(),
                label: s.label,
                predicted: p.label,
                prob_fake: p.prob_fake,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(predictions)
}

/// Mean loss and averaged gradients over one mini-batch.
fn batch_gradients(model: &Detector, batch: &[&NewsVideoSample], epoch: usize, batch_no: usize, seeds: &[u64]) -> Result<(f64, Grads)> {
    let cfg = &model.config;
    let mut grads = Grads::zeros_like(&model.store);
    let mut total = 0.0;
    for (sample, &seed) in batch.iter().zip(seeds) {
        let mut g = Graph::training(&model.store, seed);
        let out = model.forward(&mut g, sample)?;
        let loss = total_loss(&mut g, &out, sample.label, cfg.alpha, cfg.beta);
        let value = g.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batch_no,
                loss: value,
            });
        }
        total += value;
        grads.accumulate(&g.backward(loss));
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((total, grads))
}

pub fn train(
    config: ModelConfig,
    dims: FeatureDims,
    train_set: &[NewsVideoSample],
    val_set: &[NewsVideoSample],
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation split is empty".into()));
    }
    let mut model = Detector::for_training(config, dims, train_set)?;
    let cfg = model.config.clone();
    let mut adam = Adam::new(&model.store, cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, u64::MAX, 0));

    let mut history = Vec::new();
    let mut best_store = model.store.clone();
    let mut best: Option<(usize, f64)> = None;
    let mut since_improvement = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&NewsVideoSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let seeds: Vec<u64> = chunk.iter().map(|&i| stream_seed(cfg.seed, epoch as u64, i as u64)).collect();
            let (loss, grads) = batch_gradients(&model, &batch, epoch, batch_no, &seeds)?;
            loss_sum += loss;
            adam.step(&mut model.store, &grads);
        }
        let report = evaluate(&model, val_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_acc: report.accuracy,
            val_macro_f1: report.macro_f1,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, val acc {:.4}, val macro-F1 {:.4}",
            record.train_loss,
            record.val_acc,
            record.val_macro_f1
        );
        history.push(record);

        let f1 = report.macro_f1;
        match best {
            Some((_, b)) if f1 < b => since_improvement += 1,
            Some((_, b)) if f1 == b => {
                // Ties keep the later parameters without resetting patience.
                best = Some((epoch, f1));
                best_store = model.store.clone();
                since_improvement += 1;
            }
            _ => {
                best = Some((epoch, f1));
                best_store = model.store.clone();
                since_improvement = 0;
            }
        }
        if cfg.patience.is_some_and(|p| since_improvement >= p) && epoch < cfg.max_epochs {
            log::info!("early stop after epoch {epoch}");
            stopped_early = true;
            break;
        }
    }

    let (best_epoch, best_val_macro_f1) = best.expect("at least one epoch");
    model.store = best_store;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_macro_f1,
        stopped_early,
    })
}

pub fn write_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in history {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}
