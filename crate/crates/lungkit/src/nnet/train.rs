//! Seeded, bit-reproducible training with adaptive moment estimation.

use super::{bce_loss, forward, gradients, Arch, ModelParams};
use crate::dataset::{SegmentGrid, Task};
use crate::dsp::{FeatureMatrix, NormStats};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Training hyperparameters. `seed` fixes every stochastic choice:
/// parameter initialization and the per-epoch shuffle order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Batch size in recordings.
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub arch: Arch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
            arch: Arch::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.learning_rate <= 0.0
            || self.epochs == 0
            || self.batch_size == 0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
            || self.clip_norm <= 0.0
        {
            return Err(Error::ConfigInvalid(format!(
                "bad training config {self:?}"
            )));
        }
        Ok(())
    }
}

/// One recording prepared for training: raw (unnormalized) features and
/// the rasterized task labels.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub features: FeatureMatrix,
    pub grid: SegmentGrid,
}

/// Loss trace of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub final_params: ModelParams,
    /// Parameters at the epoch with the lowest validation loss (equal to
    /// `final_params` when no validation set was given).
    pub best_params: ModelParams,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
}

/// Train one binary detector. Feature normalization statistics are
/// fitted on the training samples only and stored inside the model.
pub fn train(
    task: Task,
    train_samples: &[TrainSample],
    val_samples: &[TrainSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_samples.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no training files for task {}",
            task.as_str()
        )));
    }

    let norm = NormStats::fit(train_samples.iter().map(|s| &s.features))?;
    let normalize = |samples: &[TrainSample]| -> Result<Vec<TrainSample>> {
        samples
            .iter()
            .map(|s| {
                let mut features = s.features.clone();
                norm.apply(&mut features)?;
                Ok(TrainSample {
                    features,
                    grid: s.grid.clone(),
                })
            })
            .collect()
    };
    let train_set = normalize(train_samples)?;
    let val_set = normalize(val_samples)?;

    let mut params = ModelParams::init(task, config.arch, norm, config.seed)?;
    let n_params = params.param_count();
    let mut flat = params.flatten();
    let mut m = vec![0.0f64; n_params];
    let mut v = vec![0.0f64; n_params];
    let mut step = 0usize;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best_epoch = None;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&FeatureMatrix, &SegmentGrid)> = chunk
                .iter()
                .map(|&i| (&train_set[i].features, &train_set[i].grid))
                .collect();
            let (loss, mut grad) = gradients(&params, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();

            let norm2: f64 = grad.iter().map(|g| g * g).sum();
            let gnorm = norm2.sqrt();
            if gnorm > config.clip_norm {
                let scale = config.clip_norm / gnorm;
                for g in &mut grad {
                    *g *= scale;
                }
            }

            step += 1;
            let b1t = 1.0 - config.beta1.powi(step as i32);
            let b2t = 1.0 - config.beta2.powi(step as i32);
            for i in 0..n_params {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / b1t;
                let v_hat = v[i] / b2t;
                flat[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
            params.assign_from_flat(&flat)?;
        }
        let train_loss = epoch_loss / seen as f64;

        let val_loss = if val_set.is_empty() {
            None
        } else {
            let losses: Result<Vec<f64>> = val_set
                .par_iter()
                .map(|s| bce_loss(&forward(&params, &s.features)?, &s.grid))
                .collect();
            Some(losses?.iter().sum::<f64>() / val_set.len() as f64)
        };
        if let Some(vl) = val_loss {
            if vl < best_val {
                best_val = vl;
                best_epoch = Some(epoch);
                best_params = params.clone();
            }
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
    }

    if best_epoch.is_none() {
        best_params = params.clone();
    }
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_features, random_grid, small_arch};
    use super::*;

    fn toy_samples(n: usize, frames: usize, channels: usize) -> Vec<TrainSample> {
        (0..n)
            .map(|i| TrainSample {
                features: random_features(frames, channels, 100 + i as u64),
                grid: random_grid(frames, 200 + i as u64),
            })
            .collect()
    }

    fn toy_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            learning_rate: 5e-3,
            seed: 9,
            arch: small_arch(),
            ..Default::default()
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        let err = train(Task::Das, &[], &[], &toy_config(1)).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn training_is_deterministic() {
        let samples = toy_samples(6, 15, 6);
        let a = train(Task::Inhalation, &samples, &samples[..2], &toy_config(3)).unwrap();
        let b = train(Task::Inhalation, &samples, &samples[..2], &toy_config(3)).unwrap();
        assert_eq!(a.final_params, b.final_params);
        assert_eq!(a.log, b.log);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn loss_decreases_on_learnable_data() {
        // Targets follow the sign of channel 0: easily learnable.
        let samples: Vec<TrainSample> = (0..6)
            .map(|i| {
                let features = random_features(40, 6, 500 + i);
                let grid = SegmentGrid::new((0..40).map(|t| features.row(t)[0] > 0.0).collect());
                TrainSample { features, grid }
            })
            .collect();
        let outcome = train(Task::Cas, &samples, &[], &toy_config(60)).unwrap();
        let first = outcome.log.first().unwrap().train_loss;
        let last = outcome.log.last().unwrap().train_loss;
        assert!(
            last < first * 0.5,
            "loss did not improve: {first} -> {last}"
        );
    }

    #[test]
    fn best_params_track_validation() {
        let samples = toy_samples(5, 12, 6);
        let outcome = train(Task::Das, &samples, &samples[..1], &toy_config(4)).unwrap();
        assert!(outcome.best_epoch.is_some());
        let best = outcome.best_epoch.unwrap();
        let best_loss = outcome.log[best].val_loss.unwrap();
        for e in &outcome.log {
            assert!(best_loss <= e.val_loss.unwrap() + 1e-15);
        }
    }

    #[test]
    fn norm_stats_come_from_training_fold() {
        let samples = toy_samples(4, 10, 6);
        let outcome = train(Task::Inhalation, &samples, &[], &toy_config(1)).unwrap();
        let expected = NormStats::fit(samples.iter().map(|s| &s.features)).unwrap();
        assert_eq!(outcome.final_params.norm, expected);
    }
}
