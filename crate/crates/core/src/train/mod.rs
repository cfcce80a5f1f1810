//! Mini-batch Adam training with a piecewise-constant learning rate.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_SCHEMA_VERSION};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::Parameters;
use crate::tensor::Prng;

/// PRNG stream used for per-epoch shuffling; stream 0 initializes weights.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2000,
            batch_size: 50,
            lr0: 0.001,
            decay_factor: 0.3,
            decay_every: 500,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.decay_every < 1 {
            return bad("decay_every must be at least 1");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor must lie in (0, 1]");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.eps_adam.is_nan() || self.eps_adam <= 0.0 {
            return bad("eps_adam must be positive");
        }
        Ok(())
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋`, rounded to 15 significant
/// digits so that decimal schedules such as 0.001 → 0.0003 → 0.00009 come
/// out as the decimal values rather than their accumulated binary products.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let steps = (epoch / cfg.decay_every) as i32;
    let raw = cfg.lr0 * cfg.decay_factor.powi(steps);
    format!("{raw:.14e}").parse().unwrap_or(raw)
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let b = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / b;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / b)
        .collect();
    Ok((loss, grad))
}

/// Normalized-scale MSE of `model` over `samples`.
pub fn dataset_mse(model: &Model, samples: &[WindowSample]) -> Result<f64> {
    let preds = samples
        .par_iter()
        .map(|s| model.forward(&s.input))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Ok(mse_loss(&preds, &targets)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Absent when no validation samples were given.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// CSV with header `epoch,lr,train_loss,val_loss`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in &self.records {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Result of [`train`]: final weights, best-validation weights and history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub best_model: Model,
    /// Epoch whose post-update validation loss was lowest (final epoch when
    /// there is no validation set).
    pub best_epoch: usize,
    pub history: TrainHistory,
}

/// Batch gradient: mean over samples of `dL/dθ` for the batch MSE.
/// Per-sample gradients may be computed in parallel; they are summed in
/// sample order so the result does not depend on scheduling.
fn batch_gradient(model: &Model, batch: &[&WindowSample]) -> Result<(f64, Model)> {
    let per_sample = batch
        .par_iter()
        .map(|s| model.gradient(&s.input, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<f64> = per_sample.iter().map(|(p, _)| *p).collect();
    let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
    let (loss, d_pred) = mse_loss(&preds, &targets)?;
    let mut total = model.zeroed();
    // The model output is linear in the upstream gradient, so the unit
    // gradient scaled by dL/dŷ is the sample's contribution.
    for ((_, g), d) in per_sample.iter().zip(d_pred) {
        total.add_scaled(g, d)?;
    }
    Ok((loss, total))
}

/// Trains `model` for `cfg.epochs` epochs. Each epoch shuffles the training
/// samples, applies one Adam update per batch, then records the MSE over
/// the full training and validation sets.
pub fn train(
    model: Model,
    train_set: &[WindowSample],
    val_set: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    mut model: Model,
    train_set: &[WindowSample],
    val_set: &[WindowSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut prng = Prng::new(cfg.seed).derive(SHUFFLE_STREAM);
    let mut state = AdamState::new(&model);
    let mut order: Vec<&WindowSample> = train_set.iter().collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        prng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = batch_gradient(&model, batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite batch loss at epoch {epoch}"
                )));
            }
            adam_step(&mut model, &grad, &mut state, lr, cfg)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        }

        let train_loss = dataset_mse(&model, train_set)?;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(dataset_mse(&model, val_set)?)
        };
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
        }
        if let Some(v) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, epoch, model.clone()));
            }
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        };
        on_epoch(&record);
        history.records.push(record);
    }

    let (best_epoch, best_model) = match best {
        Some((_, e, m)) => (e, m),
        None => (cfg.epochs - 1, model.clone()),
    };
    Ok(TrainOutcome {
        model,
        best_model,
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 0.001);
        assert_eq!(lr_schedule(499, &cfg), 0.001);
        assert_eq!(lr_schedule(500, &cfg), 0.0003);
        assert_eq!(lr_schedule(1250, &cfg), 0.00009);
        assert_eq!(lr_schedule(1999, &cfg), 0.000027);
    }

    #[test]
    fn mse_examples() {
        let (l, g) = mse_loss(&[0.5, 2.0], &[0.5, 2.0]).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        let (l, g) = mse_loss(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![-1.0, 0.0]);
        assert!(matches!(
            mse_loss(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let pred = [0.3, -1.2, 2.5, 0.0];
        let target = [0.1, 0.4, 2.0, -0.7];
        let (_, g) = mse_loss(&pred, &target).unwrap();
        let eps = 1e-6;
        for i in 0..pred.len() {
            let mut hi = pred;
            let mut lo = pred;
            hi[i] += eps;
            lo[i] -= eps;
            let num = (mse_loss(&hi, &target).unwrap().0 - mse_loss(&lo, &target).unwrap().0)
                / (2.0 * eps);
            assert!(crate::nn::relative_error(g[i], num) < 1e-7);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                decay_factor: 0.0,
                ..Default::default()
            },
            TrainConfig {
                decay_factor: 1.5,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn empty_training_set() {
        let model = Model::build(crate::model::Architecture::Mlp, 2, 3, &mut Prng::new(0)).unwrap();
        assert!(matches!(
            train(model, &[], &[], &TrainConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let mut prng = Prng::new(3);
        let model = Model::build(crate::model::Architecture::Lstm, 2, 3, &mut prng).unwrap();
        let samples: Vec<WindowSample> = (0..3)
            .map(|i| WindowSample {
                input: prng.uniform(-1.0, 1.0, &[2, 3]).unwrap(),
                target: i as f64 * 0.3,
                target_date: chrono::NaiveDate::from_ymd_opt(2020, 1, 1 + i).unwrap(),
                target_row: i as usize,
            })
            .collect();
        let refs: Vec<&WindowSample> = samples.iter().collect();
        let (_, g) = batch_gradient(&model, &refs).unwrap();
        let mut expected = model.zeroed();
        for s in &samples {
            let p = model.forward(&s.input).unwrap();
            let (_, gi) = model
                .gradient(&s.input, 2.0 * (p - s.target) / 3.0)
                .unwrap();
            expected.add_scaled(&gi, 1.0).unwrap();
        }
        for (a, b) in g.tensors().iter().zip(expected.tensors()) {
            assert!(a.max_abs_diff(b) < 1e-14);
        }
    }

    #[test]
    fn overfits_twenty_samples_deterministically() {
        let samples = crate::data::synthetic::linear_task(20, 3, 5, 11).unwrap();
        let cfg = TrainConfig {
            seed: 5,
            ..TrainConfig::default()
        };
        let build = || {
            Model::build(
                crate::model::Architecture::MrcLstm,
                3,
                5,
                &mut Prng::new(cfg.seed),
            )
            .unwrap()
        };
        let a = train(build(), &samples, &[], &cfg).unwrap();
        let final_loss = a.history.last().unwrap().train_loss;
        assert!(final_loss < 1e-3, "final train MSE {final_loss}");
        assert_eq!(a.history.len(), 2000);
        for r in &a.history.records {
            assert_eq!(r.lr, lr_schedule(r.epoch, &cfg));
            assert_eq!(r.val_loss, None);
        }
        let b = train(build(), &samples, &[], &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }
}
