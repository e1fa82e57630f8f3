use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::total_quantile_loss;
use super::optimizer::{adam_step, clip_global_norm, AdamConfig, OptimizerState};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{Graph, Tensor};
use crate::pipeline::Windows;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Non-improving epochs tolerated before stopping; 0 behaves as 1.
    pub patience: usize,
    pub clip_norm: f64,
    /// Caps the minibatches drawn per epoch; the shuffle still covers the
    /// whole split, so successive epochs see different subsets.
    pub max_batches_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 256,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            max_epochs: 100,
            patience: 10,
            clip_norm: 1.0,
            max_batches_per_epoch: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("training.max_epochs must be at least 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config(format!("training.clip_norm must be positive, got {}", self.clip_norm)));
        }
        if self.max_batches_per_epoch == Some(0) {
            return Err(Error::config("training.max_batches_per_epoch must be at least 1 when set"));
        }
        self.adam().validate()
    }
}

/// One line of the training log. Epoch 0 is the untrained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::Patience => "patience",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
    pub seconds: f64,
}

impl TrainReport {
    pub fn initial_val_loss(&self) -> f64 {
        self.epochs[0].val_loss
    }
}

/// Mean quantile loss over `windows` with dropout off.
pub fn evaluate_loss(model: &Model, windows: &Windows) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::config("cannot evaluate the loss of an empty split"));
    }
    let mut sum = 0.0;
    for s in windows.iter() {
        let pred = model.predict_scaled(&s.past, &s.future)?;
        sum += total_quantile_loss(&s.target, &pred, &model.config.quantile_levels)?;
    }
    Ok(sum / windows.len() as f64)
}

/// Mean loss and mean gradient over the listed training positions.
fn batch_gradients(
    model: &Model,
    windows: &Windows,
    positions: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<Tensor>)> {
    let mut loss = 0.0;
    let mut acc: Vec<Tensor> = model.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
    for &i in positions {
        let s = windows.get(i);
        let mut g = Graph::with_params(&model.params);
        let l = model.loss(&mut g, &s.past, &s.future, &s.target, true, rng)?;
        loss += g.value(l).item();
        for (a, d) in acc.iter_mut().zip(g.backward(l)?.params()) {
            a.data_mut().iter_mut().zip(d.data()).for_each(|(x, y)| *x += y);
        }
    }
    let n = positions.len() as f64;
    for a in &mut acc {
        a.data_mut().iter_mut().for_each(|x| *x /= n);
    }
    Ok((loss / n, acc))
}

fn check_splits(model: &Model, train: &Windows, val: &Windows) -> Result<()> {
    for (name, w) in [("train", train), ("validation", val)] {
        if w.is_empty() {
            return Err(Error::config(format!("{name} split is empty")));
        }
        if w.n_past != model.config.n_past || w.n_future != model.config.n_future {
            return Err(Error::config(format!(
                "{name} windows are {}+{} steps, model expects {}+{}",
                w.n_past, w.n_future, model.config.n_past, model.config.n_future
            )));
        }
    }
    if Arc::ptr_eq(train.table(), val.table()) {
        let seen: HashSet<usize> = train.origins().iter().copied().collect();
        if let Some(o) = val.origins().iter().find(|o| seen.contains(o)) {
            return Err(Error::config(format!("train and validation splits share the window at row {o}")));
        }
    }
    Ok(())
}

/// Minibatch ADAM with early stopping on validation loss. On return the
/// model holds the parameters of the best validation epoch. `on_epoch`
/// sees every record, the current model, and whether it improved.
pub fn fit(
    model: &mut Model,
    train: &Windows,
    val: &Windows,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &Model, bool) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_splits(model, train, val)?;
    let start = Instant::now();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut opt = OptimizerState::new(&model.params, cfg.adam());

    let initial = evaluate_loss(model, val)?;
    let rec = EpochRecord { epoch: 0, train_loss: None, val_loss: initial, seconds: start.elapsed().as_secs_f64() };
    on_epoch(&rec, model, true)?;
    let mut epochs = vec![rec];
    let (mut best, mut best_epoch, mut best_params) = (initial, 0, model.params.clone());
    let mut since_best = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sum, mut seen) = (0.0, 0);
        for batch in order.chunks(cfg.batch_size).take(cfg.max_batches_per_epoch.unwrap_or(usize::MAX)) {
            let (loss, mut grads) = batch_gradients(model, train, batch, &mut dropout_rng)?;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam_step(&mut model.params, &grads, &mut opt)?;
            sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let val_loss = evaluate_loss(model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Optimizer(format!("validation loss became {val_loss} at epoch {epoch}")));
        }
        let improved = val_loss < best;
        if improved {
            (best, best_epoch, best_params) = (val_loss, epoch, model.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: Some(sum / seen as f64),
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&rec, model, improved)?;
        epochs.push(rec);
        if since_best >= cfg.patience.max(1) {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    model.params = best_params;
    Ok(TrainReport { epochs, best_epoch, best_val_loss: best, stop_reason, seconds: start.elapsed().as_secs_f64() })
}
