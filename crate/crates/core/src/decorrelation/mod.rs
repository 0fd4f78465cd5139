//! Per-batch label decorrelation.
//!
//! Spectra are additive in concentrations, so any linear combination `ΛX` of
//! a batch is the spectrum of the labels `ΛY`. Drawing independent uniform
//! target labels `U` and solving `ΛY = U` therefore yields new samples whose
//! labels carry none of the batch's correlation structure. Mixing also mixes
//! the measurement noise, which is topped up (or the sample rejected) so that
//! kept samples look like single measurements.

mod augment;
mod mixing;
mod stats;

pub use augment::{augment_batch, AugmentConfig, AugmentMode, AugmentOutcome, Compensation};
pub use mixing::{
    compensate_and_filter, mix_spectra, sample_uniform_labels, solve_mixing, FilterOutcome, MixingMatrix, UniformLabels,
};
pub use stats::{AugmentStats, AugmentStatsDocument, HISTOGRAM_BINS};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::Real;

/// A mini-batch of spectra `x` (`n×m`) and labels `y` (`n×k`).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch<T> {
    pub x: Array2<T>,
    pub y: Array2<T>,
}

impl<T: Real> LabeledBatch<T> {
    pub fn new(x: Array2<T>, y: Array2<T>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                what: "batch rows",
                expected: x.nrows(),
                got: y.nrows(),
            });
        }
        if y.iter().any(|&v| v < T::zero()) {
            return Err(Error::InvalidInput("batch labels must be non-negative".into()));
        }
        Ok(LabeledBatch { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}
