use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{evaluate, train, TrainConfig};
use crate::dataset::{build_dataset, experiment_specs, normalize_labels, Dataset, ExperimentScale, NormRecord};
use crate::decorrelation::{AugmentMode, AugmentStats};
use crate::error::Result;
use crate::fixtures::CultivationFixture;
use crate::spectra::ComponentLibrary;
use crate::{rng, Real};

/// The four training setups compared in the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSetup {
    NoCorrelation,
    Cultivation,
    CultivationDecorrelate,
    CultivationDecorrelateFilter,
}

impl TrainingSetup {
    pub const ALL: [TrainingSetup; 4] = [
        TrainingSetup::NoCorrelation,
        TrainingSetup::Cultivation,
        TrainingSetup::CultivationDecorrelate,
        TrainingSetup::CultivationDecorrelateFilter,
    ];

    pub fn training_set(&self) -> &'static str {
        match self {
            TrainingSetup::NoCorrelation => "no_corr",
            _ => "train",
        }
    }

    pub fn mode(&self) -> AugmentMode {
        match self {
            TrainingSetup::NoCorrelation | TrainingSetup::Cultivation => AugmentMode::Off,
            TrainingSetup::CultivationDecorrelate => AugmentMode::Decorrelate,
            TrainingSetup::CultivationDecorrelateFilter => AugmentMode::DecorrelateFilter,
        }
    }

    fn row_label(&self) -> (&'static str, &'static str, &'static str) {
        match self {
            TrainingSetup::NoCorrelation => ("no correlation", "no", "no"),
            TrainingSetup::Cultivation => ("cultivation like", "no", "no"),
            TrainingSetup::CultivationDecorrelate => ("cultivation like", "yes", "no"),
            TrainingSetup::CultivationDecorrelateFilter => ("cultivation like", "yes", "yes"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scale: ExperimentScale,
    pub seeds: Vec<u64>,
    /// Base training configuration; the augmentation mode is set per setup.
    pub train: TrainConfig,
    /// Measurement noise of all generated spectra.
    pub sigma: f64,
}

impl ExperimentConfig {
    pub fn new(scale: ExperimentScale, master_seed: u64, epochs: usize) -> Self {
        ExperimentConfig {
            scale,
            seeds: (0..3).map(|i| rng::derive(master_seed, 0xE0 + i)).collect(),
            train: TrainConfig {
                epochs,
                ..TrainConfig::default()
            },
            sigma: crate::spectra::DEFAULT_SIGMA,
        }
    }
}

/// Results of one seed: `mse[setup][validation set]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedGrid {
    pub seed: u64,
    pub mse: Vec<Vec<f64>>,
    pub row_means: Vec<f64>,
    pub stats: Vec<AugmentStats>,
    /// Pooled terminal HHx wt.% of each validation set.
    pub terminal_hhx_pct: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setups: Vec<TrainingSetup>,
    pub validation_sets: Vec<String>,
    /// Mean over seeds of each cell.
    pub mse: Vec<Vec<f64>>,
    /// Arithmetic mean of each row of `mse`.
    pub row_means: Vec<f64>,
    pub per_seed: Vec<SeedGrid>,
    pub config: ExperimentConfig,
    pub complete: bool,
}

impl EvalReport {
    pub fn row_mean(&self, setup: TrainingSetup) -> Option<f64> {
        self.setups.iter().position(|&s| s == setup).map(|i| self.row_means[i])
    }

    /// `max − min` of a row across validation sets.
    pub fn spread(&self, setup: TrainingSetup) -> Option<f64> {
        let i = self.setups.iter().position(|&s| s == setup)?;
        let row = &self.mse[i];
        let max = row.iter().cloned().fold(f64::MIN, f64::max);
        let min = row.iter().cloned().fold(f64::MAX, f64::min);
        Some(max - min)
    }

    /// Aligned text table with one row per setup and a trailing mean column.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<18}{:>12}{:>8}", "Training Set", "Decorrelate", "Filter");
        for v in &self.validation_sets {
            let _ = write!(out, "{:>9}", v.replace('_', " "));
        }
        let _ = writeln!(out, "{:>9}", "mean");
        for (i, s) in self.setups.iter().enumerate() {
            let (name, dec, filt) = s.row_label();
            let _ = write!(out, "{name:<18}{dec:>12}{filt:>8}");
            for v in &self.mse[i] {
                let _ = write!(out, "{v:>9.4}");
            }
            let _ = writeln!(out, "{:>9.4}", self.row_means[i]);
        }
        out
    }
}

/// The eight datasets of one seed, labels normalized by the training maxima.
pub struct ExperimentData<T> {
    pub train: Dataset<T>,
    pub no_corr: Dataset<T>,
    pub validation: Vec<Dataset<T>>,
    pub norm: NormRecord,
}

pub fn build_experiment_data<T: Real>(
    scale: ExperimentScale,
    seed: u64,
    sigma: f64,
    fixture: &CultivationFixture<T>,
    library: &ComponentLibrary<T>,
) -> Result<ExperimentData<T>> {
    let mut specs = experiment_specs(scale, seed);
    for s in &mut specs {
        s.sigma = sigma;
    }
    let (train_spec, rest) = specs.split_first().expect("eight specs");
    let (no_corr_spec, val_specs) = rest.split_last().expect("eight specs");

    let mut train = build_dataset(train_spec, fixture, library, None)?;
    let upper: Vec<f64> = NormRecord::from_labels(train.y.view(), "train")?.maxima;
    let mut others: Vec<Dataset<T>> = val_specs
        .iter()
        .map(|s| build_dataset(s, fixture, library, None))
        .collect::<Result<_>>()?;
    others.push(build_dataset(no_corr_spec, fixture, library, Some(&upper))?);
    let norm = normalize_labels(&mut train, &mut others)?;
    let no_corr = others.pop().expect("no_corr built");
    Ok(ExperimentData {
        train,
        no_corr,
        validation: others,
        norm,
    })
}

/// Trains the four setups on one seed's data and evaluates each on every validation set.
pub fn run_seed<T: Real>(data: &ExperimentData<T>, config: &ExperimentConfig, seed: u64) -> Result<SeedGrid> {
    let cells: Vec<(Vec<f64>, AugmentStats)> = TrainingSetup::ALL
        .par_iter()
        .map(|setup| {
            let mut cfg = config.train;
            cfg.seed = rng::derive(seed, *setup as u64 + 1);
            cfg.augment.mode = setup.mode();
            cfg.augment.sigma = config.sigma;
            let source = match setup {
                TrainingSetup::NoCorrelation => &data.no_corr,
                _ => &data.train,
            };
            let out = train(source, &cfg)?;
            let row = data
                .validation
                .iter()
                .map(|v| evaluate(&out.model, v))
                .collect::<Result<Vec<f64>>>()?;
            Ok((row, out.stats))
        })
        .collect::<Result<_>>()?;
    let (mse, stats): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
    let row_means = mse.iter().map(|r| mean(r)).collect();
    Ok(SeedGrid {
        seed,
        mse,
        row_means,
        stats,
        terminal_hhx_pct: data
            .validation
            .iter()
            .map(|v| v.terminal_hhx_wt_pct().unwrap_or(f64::NAN))
            .collect(),
    })
}

/// Full matrix: for each seed build data, train four models, evaluate on six sets.
pub fn run_experiment_matrix<T: Real>(
    config: &ExperimentConfig,
    fixture: &CultivationFixture<T>,
    library: &ComponentLibrary<T>,
) -> Result<EvalReport> {
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    let mut validation_sets = Vec::new();
    for &seed in &config.seeds {
        let data = build_experiment_data(config.scale, seed, config.sigma, fixture, library)?;
        validation_sets = data.validation.iter().map(|d| d.spec.name.clone()).collect();
        per_seed.push(run_seed(&data, config, seed)?);
    }
    Ok(summarize(per_seed, validation_sets, config.clone()))
}

pub fn summarize(per_seed: Vec<SeedGrid>, validation_sets: Vec<String>, config: ExperimentConfig) -> EvalReport {
    let rows = TrainingSetup::ALL.len();
    let cols = validation_sets.len();
    let mut grid = vec![vec![0.0; cols]; rows];
    for g in &per_seed {
        for (r, row) in g.mse.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                grid[r][c] += v / per_seed.len() as f64;
            }
        }
    }
    let row_means = grid.iter().map(|r| mean(r)).collect();
    EvalReport {
        setups: TrainingSetup::ALL.to_vec(),
        complete: per_seed.len() == config.seeds.len() && !per_seed.is_empty(),
        validation_sets,
        mse: grid,
        row_means,
        per_seed,
        config,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}
