use serde::{Deserialize, Serialize};

use crate::cultivation::{PerturbationConfig, DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_INTERVAL};
use crate::error::{Error, Result};
use crate::rng;
use crate::spectra::DEFAULT_SIGMA;

/// HHx share of the copolymer per percent of oil in the carbon source.
pub const HHX_PER_OIL_PCT: f64 = 0.2;

/// Oil/fructose split of the carbon source, in wt.%.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstrateMix {
    pub oil_pct: f64,
}

impl SubstrateMix {
    pub fn new(oil_pct: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&oil_pct) {
            return Err(Error::InvalidInput(format!(
                "oil percentage must lie in [0, 100], got {oil_pct}"
            )));
        }
        Ok(SubstrateMix { oil_pct })
    }

    pub fn fructose_pct(&self) -> f64 {
        100.0 - self.oil_pct
    }

    /// Expected HHx wt.% of the polymer.
    pub fn hhx_pct(&self) -> f64 {
        HHX_PER_OIL_PCT * self.oil_pct
    }

    pub fn hb_pct(&self) -> f64 {
        100.0 - self.hhx_pct()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum MixPolicy {
    /// Each cultivation is either pure oil or pure fructose (fair coin).
    PureEither,
    Fixed {
        mix: SubstrateMix,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetKind {
    Cultivation {
        mix: MixPolicy,
        n_cultivations: usize,
    },
    /// Labels drawn i.i.d. uniform on `[0, training max]` per column.
    Uniform {
        samples: usize,
    },
}

/// Recipe for one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub kind: DatasetKind,
    pub horizon_h: f64,
    pub sample_interval_h: f64,
    pub dt_h: f64,
    pub perturbation: PerturbationConfig,
    pub sigma: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn cultivation(name: &str, mix: MixPolicy, n_cultivations: usize, seed: u64) -> Self {
        DatasetSpec {
            name: name.to_string(),
            kind: DatasetKind::Cultivation { mix, n_cultivations },
            horizon_h: DEFAULT_HORIZON,
            sample_interval_h: DEFAULT_INTERVAL,
            dt_h: DEFAULT_DT,
            perturbation: PerturbationConfig {
                seed,
                ..Default::default()
            },
            sigma: DEFAULT_SIGMA,
            seed,
        }
    }

    pub fn uniform(name: &str, samples: usize, seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Uniform { samples },
            ..Self::cultivation(name, MixPolicy::PureEither, 0, seed)
        }
    }

    pub fn samples_per_cultivation(&self) -> usize {
        (self.horizon_h / self.sample_interval_h + 1e-9).floor() as usize + 1
    }

    /// Number of samples this spec produces.
    pub fn sample_count(&self) -> usize {
        match self.kind {
            DatasetKind::Cultivation { n_cultivations, .. } => n_cultivations * self.samples_per_cultivation(),
            DatasetKind::Uniform { samples } => samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.perturbation.validate()?;
        if !(self.horizon_h > 0.0 && self.sample_interval_h > 0.0 && self.dt_h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{}: horizon, interval and dt must be > 0",
                self.name
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("{}: sigma must be >= 0", self.name)));
        }
        if let DatasetKind::Cultivation {
            mix: MixPolicy::Fixed { mix },
            ..
        } = self.kind
        {
            SubstrateMix::new(mix.oil_pct)?;
        }
        if self.sample_count() == 0 {
            return Err(Error::InvalidInput(format!("{}: dataset would be empty", self.name)));
        }
        Ok(())
    }
}

/// Scale of a full experiment: cultivations per training / validation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentScale {
    pub train_cultivations: usize,
    pub val_cultivations: usize,
}

impl ExperimentScale {
    /// 2,000 training and 400 validation cultivations.
    pub const FULL: ExperimentScale = ExperimentScale {
        train_cultivations: 2000,
        val_cultivations: 400,
    };
    pub const REDUCED: ExperimentScale = ExperimentScale {
        train_cultivations: 200,
        val_cultivations: 40,
    };
}

/// Oil percentages of the six validation sets.
pub const VALIDATION_OIL_PCT: [u32; 6] = [0, 20, 40, 60, 80, 100];

pub fn validation_name(oil_pct: u32) -> String {
    format!("val_{}", oil_pct / 10)
}

/// The eight datasets of the experiment: `train`, `val_0` … `val_10`, `no_corr`.
/// `no_corr` has as many samples as `train`.
pub fn experiment_specs(scale: ExperimentScale, seed: u64) -> Vec<DatasetSpec> {
    let mut specs = Vec::with_capacity(8);
    let train = DatasetSpec::cultivation(
        "train",
        MixPolicy::PureEither,
        scale.train_cultivations,
        rng::derive(seed, 1),
    );
    let train_samples = train.sample_count();
    specs.push(train);
    for (i, pct) in VALIDATION_OIL_PCT.iter().enumerate() {
        specs.push(DatasetSpec::cultivation(
            &validation_name(*pct),
            MixPolicy::Fixed {
                mix: SubstrateMix { oil_pct: *pct as f64 },
            },
            scale.val_cultivations,
            rng::derive(seed, 100 + i as u64),
        ));
    }
    specs.push(DatasetSpec::uniform("no_corr", train_samples, rng::derive(seed, 2)));
    specs
}
