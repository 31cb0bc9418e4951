use serde::{Deserialize, Serialize};

use super::Example;
use crate::error::{Error, Result};
use crate::eval::auc_opt;
use crate::model::{Model, ModelConfig, Prediction};
use crate::rng::{derive_seed, rng, shuffle};
use crate::tensor::{weighted_bce, Optimizer, OptimizerKind, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub lr: f64,
    pub batch_size: usize,
    pub w_pos: f64,
    pub w_neg: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            lr: 1e-3,
            batch_size: 32,
            w_pos: 1.0,
            w_neg: 1.0,
            max_epochs: 100,
            patience: 5,
            optimizer: OptimizerKind::Adam,
            seed: 1,
        }
    }
}

impl TrainParams {
    pub const BATCH_RANGE: (usize, usize) = (8, 128);

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::BATCH_RANGE;
        if !(lo..=hi).contains(&self.batch_size) {
            return Err(Error::Config(format!("batch size {} outside [{lo}, {hi}]", self.batch_size)));
        }
        if !(self.lr > 0.0 && self.w_pos > 0.0 && self.w_neg > 0.0) {
            return Err(Error::Config("lr and class weights must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the validation fold has a single class.
    pub valid_auc: Option<f64>,
    pub valid_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the best validation epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub best_valid_auc: Option<f64>,
    pub curve: Vec<EpochStats>,
}

const PREDICT_CHUNK: usize = 64;

/// Predictions for many examples, in chunks sharing one tape each.
pub fn predict_examples(model: &Model, examples: &[Example<'_>]) -> Result<Vec<Prediction>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(PREDICT_CHUNK) {
        let batch: Vec<_> = chunk.iter().map(|e| (e.steps, e.z)).collect();
        out.extend(model.predict_batch(&batch)?);
    }
    Ok(out)
}

fn targets(examples: &[Example<'_>]) -> Vec<f64> {
    examples.iter().map(|e| f64::from(u8::from(e.label))).collect()
}

/// Mini-batch training with weighted cross-entropy and early stopping on
/// validation AUC (validation loss when AUC is undefined). Training stops
/// once `patience` consecutive epochs fail to improve on the best one.
pub fn train(
    config: &ModelConfig,
    pretrained: Option<&Tensor>,
    train_set: &[Example<'_>],
    valid_set: &[Example<'_>],
    params: &TrainParams,
) -> Result<TrainOutcome> {
    params.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training fold".into()));
    }
    let mut model = match pretrained {
        Some(w) => Model::with_pretrained_embedding(config.clone(), w.clone())?,
        None => Model::new(config.clone())?,
    };
    let mut opt = Optimizer::new(params.optimizer, params.lr);
    let valid_labels: Vec<bool> = valid_set.iter().map(|e| e.label).collect();
    let valid_targets = targets(valid_set);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, Model, Option<f64>)> = None;
    let mut stale = 0;
    let diverged = |e: Error| match e {
        Error::NonFinite { op } => Error::Divergence(format!("non-finite value in {op}")),
        other => other,
    };

    for epoch in 0..params.max_epochs {
        shuffle(&mut order, &mut rng(derive_seed(params.seed, &format!("epoch-{epoch}"))));
        let mut loss_sum = 0.0;
        for idx in order.chunks(params.batch_size) {
            let batch: Vec<Example<'_>> = idx.iter().map(|&i| train_set[i]).collect();
            let mut tape = Tape::new();
            let bp = model.bind(&mut tape, true)?;
            let inputs: Vec<_> = batch.iter().map(|e| (e.steps, e.z)).collect();
            let vars = model.forward_batch(&mut tape, &bp, &inputs).map_err(diverged)?;
            let logits: Vec<_> = vars.iter().map(|v| v.logit).collect();
            let stacked = tape.concat_rows(&logits)?;
            let probs = tape.sigmoid(stacked).map_err(diverged)?;
            let loss = tape
                .weighted_bce(probs, &targets(&batch), params.w_pos, params.w_neg)
                .map_err(diverged)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Divergence(format!("loss became {value} in epoch {epoch}")));
            }
            loss_sum += value * batch.len() as f64;
            tape.backward(loss)?;
            let grads: Vec<Tensor> = bp.vars.iter().map(|&v| tape.grad_or_zeros(v)).collect();
            let mut ps: Vec<&mut Tensor> = model.params_mut().iter_mut().collect();
            opt.step(&mut ps, &grads);
            if ps.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence(format!("parameters became non-finite in epoch {epoch}")));
            }
        }

        let preds = predict_examples(&model, valid_set)?;
        let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
        let valid_auc = auc_opt(&probs, &valid_labels);
        let valid_loss = weighted_bce(&probs, &valid_targets, params.w_pos, params.w_neg);
        curve.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            valid_auc,
            valid_loss,
        });
        let score = valid_auc.unwrap_or(-valid_loss);
        let improved = best.as_ref().is_none_or(|(b, ..)| score > *b);
        if improved {
            best = Some((score, epoch, model.clone(), valid_auc));
            stale = 0;
        } else {
            stale += 1;
            if stale > params.patience {
                break;
            }
        }
    }
    let (_, best_epoch, model, best_valid_auc) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { model, best_epoch, best_valid_auc, curve })
}
