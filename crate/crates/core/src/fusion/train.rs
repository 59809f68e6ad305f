//! Mini-batch SGD with early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::{argmax, softmax_cross_entropy, ForwardCache, Mlp, MlpError, COMMAND_NET};
use super::window::InputTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub tensor: InputTensor,
    pub label: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index} has label {label}, network has {classes} outputs")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] MlpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 4e-3,
            patience: 100,
            max_epochs: 5000,
            validation_fraction: 0.2,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(TrainError::Config(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning_rate {} is not a finite non-negative number", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sample loss on the training split after the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub n_train: usize,
    pub n_val: usize,
}

impl TrainingHistory {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Mean cross-entropy over a set of samples.
pub fn mean_loss(mlp: &Mlp, samples: &[Sample]) -> Result<f64, MlpError> {
    let mut total = 0.0;
    for s in samples {
        total += softmax_cross_entropy(&mlp.logits(&s.tensor.values)?, s.label).0;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Trains a freshly initialised command classifier.
pub fn train(dataset: &[Sample], config: &TrainingConfig) -> Result<(Mlp, TrainingHistory), TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let init = Mlp::random(&COMMAND_NET, &mut rng);
    train_from(init, dataset, config)
}

/// Trains starting from `init`. The validation split, batch order and any
/// initialisation are all driven by `config.rng_seed`.
pub fn train_from(init: Mlp, dataset: &[Sample], config: &TrainingConfig) -> Result<(Mlp, TrainingHistory), TrainError> {
    config.validate()?;
    init.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let classes = init.n_outputs();
    if let Some((index, s)) = dataset.iter().enumerate().find(|(_, s)| s.label >= classes) {
        return Err(TrainError::LabelOutOfRange { index, label: s.label, classes });
    }

    // Separate stream from the one used for initialisation in `train`.
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x5eed_f00d);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (dataset.len() as f64 * config.validation_fraction).floor() as usize;
    let val: Vec<Sample> = order[..n_val].iter().map(|&i| dataset[i]).collect();
    let train: Vec<Sample> = order[n_val..].iter().map(|&i| dataset[i]).collect();

    let mut mlp = init;
    let mut grad = mlp.clone();
    let mut cache = ForwardCache::default();
    let mut best = mlp.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut idx: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        idx.shuffle(&mut rng);
        for batch in idx.chunks(config.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                mlp.backprop(&train[i].tensor.values, train[i].label, &mut grad, &mut cache)?;
            }
            // Summed batch loss, so the step scales with the batch.
            mlp.axpy(-config.learning_rate, &grad);
        }
        let train_loss = mean_loss(&mlp, &train)?;
        let val_loss = if val.is_empty() { train_loss } else { mean_loss(&mlp, &val)? };
        epochs.push(EpochStats { epoch, train_loss, val_loss });
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best.clone_from(&mlp);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let history = TrainingHistory {
        epochs,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
        n_train: train.len(),
        n_val: val.len(),
    };
    Ok((best, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(mlp: &Mlp, dataset: &[Sample]) -> Result<Evaluation, MlpError> {
    let k = mlp.n_outputs();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    for s in dataset {
        let pred = argmax(&mlp.logits(&s.tensor.values)?);
        if s.label < k {
            confusion[s.label][pred] += 1;
        }
        correct += usize::from(pred == s.label);
    }
    Ok(Evaluation { accuracy: correct as f64 / dataset.len().max(1) as f64, confusion })
}
