use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mixing::{compensate_and_filter, mix_spectra, sample_uniform_labels, solve_mixing};
use super::stats::AugmentStats;
use super::LabeledBatch;
use crate::error::{Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    #[default]
    Off,
    /// Remix every batch, keep all rows, add no noise.
    Decorrelate,
    /// Remix, then compensate noise and reject rows that cannot be compensated.
    DecorrelateFilter,
}

impl AugmentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AugmentMode::Off => "off",
            AugmentMode::Decorrelate => "decorrelate",
            AugmentMode::DecorrelateFilter => "decorrelate_filter",
        }
    }
}

impl std::str::FromStr for AugmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(AugmentMode::Off),
            "decorrelate" => Ok(AugmentMode::Decorrelate),
            "decorrelate_filter" | "decorrelate-filter" => Ok(AugmentMode::DecorrelateFilter),
            _ => Err(Error::InvalidInput(format!("unknown augmentation mode `{s}`"))),
        }
    }
}

/// How the noise of a mixed row is measured against the source noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    /// `s_i = Σ_j λ_ij`
    PaperLinear,
    /// `s_i = Σ_j λ_ij²`, the variance of a sum of independent noise terms.
    #[default]
    VarianceExact,
}

impl std::str::FromStr for Compensation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_linear" | "paper-linear" | "linear" => Ok(Compensation::PaperLinear),
            "variance_exact" | "variance-exact" | "exact" => Ok(Compensation::VarianceExact),
            _ => Err(Error::InvalidInput(format!("unknown compensation `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub compensation: Compensation,
    /// Noise standard deviation of the source spectra.
    pub sigma: f64,
    /// Relative singular-value cutoff of the mixing solve.
    pub rank_tol: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mode: AugmentMode::Off,
            compensation: Compensation::VarianceExact,
            sigma: crate::spectra::DEFAULT_SIGMA,
            rank_tol: 1e-10,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rank_tol must lie in (0, 1), got {}",
                self.rank_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AugmentOutcome<T> {
    /// `None` when the batch was skipped (rank deficient or fully rejected).
    pub batch: Option<LabeledBatch<T>>,
    pub stats: AugmentStats,
}

/// Runs the full per-batch pipeline: sample targets, solve, mix, and
/// (in [`AugmentMode::DecorrelateFilter`]) compensate and filter.
pub fn augment_batch<T: Real, R: Rng + ?Sized>(
    batch: &LabeledBatch<T>,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<AugmentOutcome<T>> {
    config.validate()?;
    if config.mode == AugmentMode::Off {
        return Ok(AugmentOutcome {
            batch: Some(batch.clone()),
            stats: AugmentStats::default(),
        });
    }
    let n = batch.len();
    let k = batch.y.ncols();
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "batch size {n} must exceed the label count {k}"
        )));
    }
    let targets = sample_uniform_labels(batch.y.view(), rng);
    let mixing = match solve_mixing(batch.y.view(), targets.u.view(), T::lit(config.rank_tol)) {
        Ok(m) => m,
        Err(Error::RankDeficient { .. }) => {
            return Ok(AugmentOutcome {
                batch: None,
                stats: AugmentStats::skipped(n),
            })
        }
        Err(e) => return Err(e),
    };
    let mixed = mix_spectra(batch.x.view(), &mixing)?;

    match config.mode {
        AugmentMode::Decorrelate => Ok(AugmentOutcome {
            batch: Some(LabeledBatch { x: mixed, y: targets.u }),
            stats: AugmentStats::single(n, 0),
        }),
        AugmentMode::DecorrelateFilter => {
            let out = compensate_and_filter(mixed.view(), targets.u.view(), &mixing, config, rng)?;
            let stats = AugmentStats::single(n, out.rejected);
            let batch = (!out.kept.is_empty()).then(|| LabeledBatch { x: out.x, y: out.y });
            Ok(AugmentOutcome { batch, stats })
        }
        AugmentMode::Off => unreachable!(),
    }
}
