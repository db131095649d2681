use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::build::{softmax_rows, BuiltModel, ModelOptions, Propagation};
use super::metrics::auc_score;
use super::{ArchitectureParams, ModelError};
use crate::graph::{Graph, Split};
use crate::tensor::{Adam, AdamConfig, Parameter, Tape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a strictly better
    /// validation AUC.
    pub patience: usize,
    pub options: ModelOptions,
    /// Record wall-clock training time. When off, `train_seconds` is zero,
    /// which makes results bitwise reproducible.
    pub measure_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            max_epochs: 500,
            patience: 10,
            options: ModelOptions::default(),
            measure_time: true,
        }
    }
}

/// Outcome of one train-and-validate cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub val_auc: f64,
    pub test_auc: f64,
    pub train_seconds: f64,
    pub epochs_run: usize,
    pub final_epoch_loss: f64,
    /// Training hit a non-finite loss or score; the AUCs are reported as 0.
    #[serde(default)]
    pub diverged: bool,
}

impl EvalResult {
    /// Result recorded for a candidate that could not be trained.
    pub fn failed() -> Self {
        Self {
            val_auc: 0.0,
            test_auc: 0.0,
            train_seconds: 0.0,
            epochs_run: 0,
            final_epoch_loss: f64::NAN,
            diverged: true,
        }
    }

    /// Equality of everything except wall-clock time.
    pub fn same_metrics(&self, other: &Self) -> bool {
        self.val_auc.to_bits() == other.val_auc.to_bits()
            && self.test_auc.to_bits() == other.test_auc.to_bits()
            && self.epochs_run == other.epochs_run
            && self.final_epoch_loss.to_bits() == other.final_epoch_loss.to_bits()
            && self.diverged == other.diverged
    }
}

/// Per-epoch trace, kept for diagnostics and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub losses: Vec<f64>,
    pub val_aucs: Vec<f64>,
    pub best_epoch: usize,
}

/// Full-batch training with early stopping on validation AUC.
///
/// After every optimizer step the model is scored on the validation nodes.
/// Training stops once `patience` consecutive epochs fail to beat the best
/// score, or after `max_epochs`. The parameters of the best epoch are
/// restored before the test AUC is computed.
pub fn train_model(
    arch: &ArchitectureParams,
    g: &Graph,
    split: &Split,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<(BuiltModel, EvalResult), ModelError> {
    train_model_with_history(arch, g, split, seed, cfg).map(|(m, r, _)| (m, r))
}

pub fn train_model_with_history(
    arch: &ArchitectureParams,
    g: &Graph,
    split: &Split,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<(BuiltModel, EvalResult, TrainHistory), ModelError> {
    let start = Instant::now();
    let mut model = BuiltModel::build(arch, g.num_features(), g.num_labels(), cfg.options, seed)?;
    let prop = Propagation::new(g, &cfg.options);
    let labels = g.labels();
    let mut adam = Adam::new(cfg.adam);
    let mut history = TrainHistory::default();

    let mut best_val = f64::NEG_INFINITY;
    let mut best_params: Vec<Parameter> = model.params().to_vec();
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut final_loss = f64::NAN;
    let elapsed = |start: Instant| if cfg.measure_time { start.elapsed().as_secs_f64() } else { 0.0 };
    let diverged = |epochs_run, final_epoch_loss| EvalResult {
        val_auc: 0.0,
        test_auc: 0.0,
        train_seconds: elapsed(start),
        epochs_run,
        final_epoch_loss,
        diverged: true,
    };

    for epoch in 1..=cfg.max_epochs {
        let mut tape = Tape::new();
        let x = tape.constant(g.features().clone());
        let fp = model.forward(&mut tape, x, &prop)?;
        let loss = tape.softmax_cross_entropy(fp.logits, labels, &split.train)?;
        final_loss = tape.value(loss).item();
        epochs_run = epoch;
        history.losses.push(final_loss);
        if !final_loss.is_finite() {
            return Ok((model, diverged(epochs_run, final_loss), history));
        }
        let mut grads = tape.backward(loss)?;
        for (p, &v) in model.params_mut().iter_mut().zip(&fp.params) {
            p.grad = grads.take(v);
        }
        drop(tape);
        adam.step(model.params_mut());

        let probs = softmax_rows(&eval_logits(&model, g, &prop)?);
        if !probs.all_finite() {
            return Ok((model, diverged(epochs_run, final_loss), history));
        }
        let val = auc_score(&probs, labels, &split.val)?;
        history.val_aucs.push(val);
        if val > best_val {
            best_val = val;
            best_params.clone_from_slice(model.params());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    for (p, best) in model.params_mut().iter_mut().zip(best_params) {
        p.value = best.value;
        p.grad = None;
    }
    let probs = softmax_rows(&eval_logits(&model, g, &prop)?);
    let test_auc = auc_score(&probs, labels, &split.test)?;
    let result = EvalResult {
        val_auc: best_val.max(0.0),
        test_auc,
        train_seconds: elapsed(start),
        epochs_run,
        final_epoch_loss: final_loss,
        diverged: false,
    };
    Ok((model, result, history))
}

fn eval_logits(model: &BuiltModel, g: &Graph, prop: &Propagation) -> Result<crate::tensor::Tensor, ModelError> {
    let mut tape = Tape::new();
    let x = tape.constant(g.features().clone());
    let fp = model.forward(&mut tape, x, prop)?;
    Ok(tape.value(fp.logits).clone())
}
