//! Mini-batch training with SGDM and evaluation.
//!
//! Each epoch visits the training set in a seeded permutation; sample `i` of
//! epoch `e` is augmented with `derive_seed(seed, e, i)`, so a run is fully
//! determined by the data order, the config and the initial model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::augment::{augment_sample, center_crop, AugmentConfig, AugmentError};
use crate::engine::{softmax_cross_entropy, softmax_rows, EngineError, Model, OptimizerConfig, Scalar, Sgdm, Tensor};
use crate::imaging::Image16;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("label {label} outside 0..{classes}")]
    BadLabel { label: usize, classes: usize },
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T> = core::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub image: Image16,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Training transform; its `output_side` is also the evaluation crop.
    pub augment: AugmentConfig,
    /// When false, training uses the evaluation center crop.
    pub augment_enabled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 128,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            augment: AugmentConfig::default(),
            augment_enabled: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size must be at least 1".into()));
        }
        self.optimizer.validate()?;
        self.augment.validate()?;
        Ok(())
    }

    pub fn input_side(&self) -> usize {
        self.augment.output_side
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// `None` without validation data.
    pub val_acc: Option<f64>,
    /// Filled in by the caller's epoch hook, if it keeps time.
    pub wall_clock_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) of the snapshot with the best validation accuracy;
    /// the final epoch when there is no validation data.
    pub best_epoch: usize,
    pub best_model: Model<T>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn stack<T: Scalar>(samples: &[Tensor<T>]) -> Tensor<T> {
    let mut shape = alloc::vec![samples.len()];
    shape.extend_from_slice(samples[0].shape());
    let mut data = Vec::with_capacity(samples.len() * samples[0].len());
    for s in samples {
        data.extend_from_slice(s.data());
    }
    Tensor::from_vec(&shape, data).expect("samples share a shape")
}

fn check_labels<T: Scalar>(model: &Model<T>, data: &[LabeledImage]) -> Result<usize> {
    let classes = model.graph().output_shape()[0];
    if let Some(s) = data.iter().find(|s| s.label >= classes) {
        return Err(TrainError::BadLabel { label: s.label, classes });
    }
    Ok(classes)
}

/// Trains `model` in place; `on_epoch` sees every record (and may set its
/// wall-clock time) together with the model after that epoch.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_data: &[LabeledImage],
    val_data: &[LabeledImage],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&mut EpochRecord, &Model<T>),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_labels(model, train_data)?;
    check_labels(model, val_data)?;
    let mut opt = Sgdm::new(cfg.optimizer, model.params())?;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Model<T>)> = None;
    let side = cfg.input_side();
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, epoch as u64, u64::MAX)));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let sample = &train_data[i];
                let x = if cfg.augment_enabled {
                    augment_sample(&sample.image, &cfg.augment, derive_seed(cfg.seed, epoch as u64, i as u64))?
                } else {
                    center_crop(&sample.image, side)?
                };
                inputs.push(x);
                targets.push(sample.label);
            }
            let x = stack(&inputs);
            let pass = model.forward_train(&x)?;
            let (loss, grad) = softmax_cross_entropy(pass.output(), &targets)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_index,
                    loss,
                });
            }
            loss_sum += loss * batch.len() as f64;
            correct += pass
                .output()
                .rows()
                .zip(&targets)
                .filter(|(row, &t)| argmax(row) == t)
                .count();
            let grads = model.backward(&pass, &grad, false)?;
            opt.step(model.params_mut(), &grads.params)?;
        }
        let val_acc = if val_data.is_empty() {
            None
        } else {
            let eval = evaluate(model, val_data, side)?;
            let hits = eval.predictions.iter().zip(val_data).filter(|(p, s)| **p == s.label).count();
            Some(hits as f64 / val_data.len() as f64)
        };
        let mut record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train_data.len() as f64,
            train_acc: correct as f64 / train_data.len() as f64,
            val_acc,
            wall_clock_secs: None,
        };
        on_epoch(&mut record, model);
        let improved = match (&best, val_acc) {
            (None, _) => true,
            (Some((_, b, _)), Some(v)) => v > *b,
            (Some(_), None) => true,
        };
        if improved {
            best = Some((epoch + 1, val_acc.unwrap_or(0.0), model.clone()));
        }
        history.push(record);
    }
    let (best_epoch, _, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_model,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    /// Softmax probabilities, one row per sample.
    pub scores: Vec<Vec<f64>>,
}

/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 64;

/// Center-cropped inference with running batch-norm statistics.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &[LabeledImage], side: usize) -> Result<Evaluation> {
    let mut predictions = Vec::with_capacity(data.len());
    let mut scores = Vec::with_capacity(data.len());
    for chunk in data.chunks(EVAL_BATCH) {
        let inputs = chunk
            .iter()
            .map(|s| center_crop(&s.image, side))
            .collect::<core::result::Result<Vec<Tensor<T>>, _>>()?;
        let logits = model.predict(&stack(&inputs))?;
        let probs = softmax_rows(&logits)?;
        for row in probs.rows() {
            predictions.push(argmax(row));
            scores.push(row.iter().map(|v| v.as_f64()).collect());
        }
    }
    Ok(Evaluation { predictions, scores })
}

/// Formats a history as the JSON-lines report, one epoch per line.
pub fn history_jsonl(history: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in history {
        let val = r.val_acc.map_or(String::from("null"), |v| format!("{v}"));
        out.push_str(&format!(
            "{{\"epoch\":{},\"train_loss\":{},\"train_acc\":{},\"val_acc\":{}}}\n",
            r.epoch, r.train_loss, r.train_acc, val
        ));
    }
    out
}
