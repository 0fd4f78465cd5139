use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::regressor::{GradientModel, LinearRegressor, Regressor};
use crate::dataset::{BatchIter, Dataset};
use crate::decorrelation::{augment_batch, AugmentConfig, AugmentStats, LabeledBatch};
use crate::error::{Error, Result};
use crate::{rng, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-2,
            l2: 1e-6,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidInput("learning rate must be > 0".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidInput("L2 penalty must be >= 0".into()));
        }
        self.augment.validate()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: LinearRegressor<T>,
    pub stats: AugmentStats,
    /// Mean batch loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Mini-batch SGD of a [`LinearRegressor`], augmenting each batch per
/// `config.augment` before the step. The loss is averaged over the rows that
/// survive augmentation; batches with no survivors are skipped.
pub fn train<T: Real>(dataset: &Dataset<T>, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let k = dataset.y.ncols();
    if config.batch_size <= k && config.augment.mode != crate::decorrelation::AugmentMode::Off {
        return Err(Error::InvalidInput(format!(
            "batch size {} must exceed the label count {k} for augmentation",
            config.batch_size
        )));
    }
    let mut model = LinearRegressor::standardized_on(dataset.x.view(), k, dataset.norm.clone());
    let (stats, loss_history) = fit_model(&mut model, dataset, config)?;
    Ok(TrainOutcome {
        model,
        stats,
        loss_history,
    })
}

/// Runs the augmented batch stream of `config` over `dataset`, calling `step`
/// with each epoch index and surviving batch.
fn for_each_batch<T: Real>(
    dataset: &Dataset<T>,
    config: &TrainConfig,
    mut step: impl FnMut(usize, LabeledBatch<T>) -> Result<()>,
) -> Result<AugmentStats> {
    let shuffle_seed = rng::derive(config.seed, 0x5348_5546);
    let augment_seed = rng::derive(config.seed ^ config.augment.seed, 0x4155_4721);
    let mut stats = AugmentStats::default();
    for epoch in 0..config.epochs {
        let batches = BatchIter::new(
            dataset.x.view(),
            dataset.y.view(),
            config.batch_size,
            Some(shuffle_seed),
            epoch,
        )?;
        let per_epoch = batches.batches_per_epoch() as u64;
        for (b, batch) in batches.enumerate() {
            let mut rng = rng::substream(augment_seed, epoch as u64 * per_epoch + b as u64);
            let out = augment_batch(&batch, &config.augment, &mut rng)?;
            stats.merge(&out.stats);
            if let Some(batch) = out.batch {
                step(epoch, batch)?;
            }
        }
    }
    Ok(stats)
}

/// Training loop over any [`GradientModel`].
pub fn fit_model<T: Real, M: GradientModel<T>>(
    model: &mut M,
    dataset: &Dataset<T>,
    config: &TrainConfig,
) -> Result<(AugmentStats, Vec<f64>)> {
    let lr = T::lit(config.learning_rate);
    let l2 = T::lit(config.l2);
    let mut sums = vec![(0.0, 0usize); config.epochs];
    let stats = for_each_batch(dataset, config, |epoch, batch| {
        let loss = model.sgd_step(batch.x.view(), batch.y.view(), lr, l2);
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        sums[epoch].0 += loss.as_f64();
        sums[epoch].1 += 1;
        Ok(())
    })?;
    let history = sums
        .into_iter()
        .map(|(s, n)| if n > 0 { s / n as f64 } else { f64::NAN })
        .collect();
    Ok((stats, history))
}

/// Augmentation statistics of the batches `train` would see under `config`,
/// without training.
pub fn augmentation_stats<T: Real>(dataset: &Dataset<T>, config: &TrainConfig) -> Result<AugmentStats> {
    config.validate()?;
    for_each_batch(dataset, config, |_, _| Ok(()))
}

/// Mean squared error over samples and label dimensions.
pub fn evaluate<T: Real, M: Regressor<T>>(model: &M, val: &Dataset<T>) -> Result<f64> {
    if model.norm() != val.norm.as_ref() {
        return Err(Error::NormalizationMismatch);
    }
    mse(model, val.x.view(), val.y.view())
}

/// MSE without the normalization check.
pub fn mse<T: Real, M: Regressor<T>>(
    model: &M,
    x: ndarray::ArrayView2<'_, T>,
    y: ndarray::ArrayView2<'_, T>,
) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            what: "evaluation rows",
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    const CHUNK: usize = 4096;
    let mut sum = 0.0;
    for (xc, yc) in x
        .axis_chunks_iter(Axis(0), CHUNK)
        .zip(y.axis_chunks_iter(Axis(0), CHUNK))
    {
        let pred = model.predict_batch(xc);
        sum += (&pred - &yc).iter().map(|e| e.as_f64().powi(2)).sum::<f64>();
    }
    Ok(sum / y.len() as f64)
}
