//! Random-context training.
//!
//! Every example in every epoch gets a fresh mask from
//! [`make_training_mask`], so over many epochs the model sees each piece
//! under many different sets of known chords. Batches average per-example
//! gradients; the global gradient norm is clipped before each Adam step.
//! After every epoch the validation loss decides whether the current weights
//! become the returned checkpoint.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::leadsheet::{CorpusStats, FrameSequence};
use crate::nn::{
    adam_step, assemble_input, make_training_mask, masked_nll, AdamState, Checkpoint, ClassWeights, Hyper,
    ModelParams, NUM_CHORDS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
    pub class_balancing: bool,
    pub validation_fraction: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_max: 10,
            batch_size: 32,
            lr: AdamState::DEFAULT_LR,
            dropout: 0.2,
            hidden: 128,
            seed: 0,
            class_balancing: true,
            validation_fraction: 0.05,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::domain(m.to_string()));
        if self.epochs_max == 0 || self.batch_size == 0 || self.hidden == 0 {
            return bad("epochs_max, batch_size and hidden must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0, 1)");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        let best = self.best_epoch?;
        self.epochs.iter().find(|e| e.epoch == best).map(|e| e.val_loss)
    }

    /// `(train_loss, val_loss)` per epoch, without timings.
    pub fn losses(&self) -> Vec<(f64, f64)> {
        self.epochs.iter().map(|e| (e.train_loss, e.val_loss)).collect()
    }

    /// One JSON object per line: `{epoch, train_loss, val_loss, seconds}`.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("record serializes") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

/// Training stopped on a non-finite loss. `last_good` holds the best
/// checkpoint seen so far (the initial weights if no epoch finished).
#[derive(Debug, Error)]
#[error("training aborted in epoch {epoch}: {source}")]
pub struct TrainAbort {
    pub epoch: usize,
    pub source: Error,
    pub last_good: Box<Checkpoint>,
    pub history: TrainHistory,
}

/// Derives an independent generator for `(seed, a, b)`.
pub(crate) fn derived_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    rng
}

const EVAL_SEED: u64 = 0x5EED_0E7A;

/// Mean masked loss over `dataset`. Example `i` always gets the same mask,
/// so values are comparable across epochs.
pub fn evaluate_loss(params: &ModelParams, dataset: &[FrameSequence], weights: &ClassWeights) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::domain("evaluation set is empty"));
    }
    let losses: Vec<f64> = dataset
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let mut rng = derived_rng(EVAL_SEED, 0, i as u64);
            let mask = make_training_mask(seq.len(), &mut rng);
            let input = assemble_input(&seq.melody, &seq.chords, &mask)?;
            let pass = params.forward(&input, None)?;
            masked_nll(pass.logits.view(), &seq.chords, &mask, weights)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Loss and gradients of one example under a fresh random context.
fn example_step(
    params: &ModelParams,
    seq: &FrameSequence,
    weights: &ClassWeights,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, ModelParams)> {
    let mask = make_training_mask(seq.len(), rng);
    let input = assemble_input(&seq.melody, &seq.chords, &mask)?;
    let pass = params.forward(&input, Some(rng))?;
    let loss = masked_nll(pass.logits.view(), &seq.chords, &mask, weights)?;
    if !loss.is_finite() {
        return Err(Error::Numerical { layer: "loss".into() });
    }
    let grads = params.backward(&pass, &seq.chords, &mask, weights)?;
    Ok((loss, grads))
}

pub fn loss_weights(stats: &CorpusStats, balancing: bool) -> ClassWeights {
    if balancing {
        ClassWeights::from_counts(&stats.chord_counts)
    } else {
        ClassWeights::uniform(NUM_CHORDS)
    }
}

/// Splits a seeded validation subset off `corpus` and trains.
pub fn train(corpus: &[FrameSequence], stats: &CorpusStats, cfg: &TrainConfig) -> Result<TrainOutcome, TrainAbort> {
    let abort = |source: Error| TrainAbort {
        epoch: 0,
        source,
        last_good: Box::new(Checkpoint::new(ModelParams::zeros(Hyper::default()))),
        history: TrainHistory::default(),
    };
    if corpus.is_empty() {
        return Err(abort(Error::domain("training corpus is empty")));
    }
    cfg.validate().map_err(abort)?;
    let (train_set, val_set) = validation_split(corpus, cfg.validation_fraction, cfg.seed);
    train_with_validation(&train_set, &val_set, stats, cfg)
}

/// Pieces held out for validation, by piece. A single-piece corpus validates
/// on itself.
pub fn validation_split(corpus: &[FrameSequence], fraction: f64, seed: u64) -> (Vec<FrameSequence>, Vec<FrameSequence>) {
    if corpus.len() < 2 {
        return (corpus.to_vec(), corpus.to_vec());
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut derived_rng(seed, u64::MAX, 0));
    let n_val = ((corpus.len() as f64 * fraction).floor() as usize).clamp(1, corpus.len() - 1);
    let val = order[..n_val].iter().map(|&i| corpus[i].clone()).collect();
    let mut train_idx = order[n_val..].to_vec();
    train_idx.sort_unstable();
    let train = train_idx.into_iter().map(|i| corpus[i].clone()).collect();
    (train, val)
}

/// Trains on `train_set`, selecting the epoch with the lowest loss on
/// `val_set`.
pub fn train_with_validation(
    train_set: &[FrameSequence],
    val_set: &[FrameSequence],
    stats: &CorpusStats,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainAbort> {
    let weights = loss_weights(stats, cfg.class_balancing);
    let mut params = ModelParams::init(Hyper {
        hidden: cfg.hidden,
        dropout: cfg.dropout,
        seed: cfg.seed,
    });
    let wrap = |params: ModelParams| Checkpoint {
        params,
        stats: Some(stats.clone()),
        class_balancing: cfg.class_balancing,
        class_weights: weights.clone(),
    };
    let mut best = wrap(params.clone());
    let mut best_val = f64::INFINITY;
    let mut history = TrainHistory::default();

    let precheck = cfg
        .validate()
        .and_then(|_| {
            if train_set.is_empty() || val_set.is_empty() {
                Err(Error::domain("training and validation sets must be non-empty"))
            } else {
                Ok(())
            }
        })
        .and_then(|_| train_set.iter().chain(val_set).try_for_each(FrameSequence::validate));
    if let Err(source) = precheck {
        return Err(TrainAbort {
            epoch: 0,
            source,
            last_good: Box::new(best),
            history,
        });
    }

    let mut adam = AdamState::new(&params, cfg.lr);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs_max {
        let started = Instant::now();
        order.shuffle(&mut derived_rng(cfg.seed, epoch as u64, u64::MAX));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Result<Vec<(f64, ModelParams)>> = batch
                .par_iter()
                .enumerate()
                .map(|(k, &i)| {
                    let position = (b * cfg.batch_size + k) as u64;
                    let mut rng = derived_rng(cfg.seed, epoch as u64, position);
                    example_step(&params, &train_set[i], &weights, &mut rng)
                })
                .collect();
            let results = match results {
                Ok(r) => r,
                Err(source) => {
                    return Err(TrainAbort {
                        epoch,
                        source,
                        last_good: Box::new(best),
                        history,
                    })
                }
            };
            let mut grad = params.zeros_like();
            for (loss, g) in &results {
                loss_sum += loss;
                grad.add_scaled(g, 1.0);
            }
            grad.scale(1.0 / results.len() as f64);
            if let Some(clip) = cfg.clip_norm {
                let norm = grad.global_norm();
                if norm > clip {
                    grad.scale(clip / norm);
                }
            }
            adam_step(&mut params, &grad, &mut adam).expect("gradient shapes match parameters");
            params.round_to_f32();
            if !params.is_finite() {
                return Err(TrainAbort {
                    epoch,
                    source: Error::Numerical { layer: "parameters".into() },
                    last_good: Box::new(best),
                    history,
                });
            }
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = match evaluate_loss(&params, val_set, &weights) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                return Err(TrainAbort {
                    epoch,
                    source: Error::Numerical { layer: "validation loss".into() },
                    last_good: Box::new(best),
                    history,
                })
            }
            Err(source) => {
                return Err(TrainAbort {
                    epoch,
                    source,
                    last_good: Box::new(best),
                    history,
                })
            }
        };
        log::info!("epoch {epoch}: train loss {train_loss:.4}, validation loss {val_loss:.4}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = wrap(params.clone());
            history.best_epoch = Some(epoch);
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        history,
    })
}
