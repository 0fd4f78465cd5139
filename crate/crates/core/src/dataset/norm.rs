use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::build::Dataset;
use crate::error::{Error, Result};
use crate::spectra::SUBSTANCES;
use crate::Real;

/// Per-label maxima of the training set used to scale all labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub labels: Vec<String>,
    pub maxima: Vec<f64>,
    /// Dataset the maxima were taken from.
    pub source: String,
}

impl NormRecord {
    pub fn from_labels<T: Real>(y: ArrayView2<'_, T>, source: &str) -> Result<Self> {
        let maxima: Vec<f64> = y
            .axis_iter(Axis(1))
            .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.as_f64())))
            .collect();
        let labels: Vec<String> = (0..maxima.len())
            .map(|j| {
                SUBSTANCES
                    .get(j)
                    .map_or_else(|| format!("label_{j}"), |s| s.to_string())
            })
            .collect();
        if let Some(j) = maxima.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::ZeroRange(labels[j].clone()));
        }
        Ok(NormRecord {
            labels,
            maxima,
            source: source.to_string(),
        })
    }

    pub fn normalize<T: Real>(&self, y: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = y.to_owned();
        for (mut col, &m) in out.axis_iter_mut(Axis(1)).zip(&self.maxima) {
            col.mapv_inplace(|v| v / T::lit(m));
        }
        out
    }

    pub fn denormalize<T: Real>(&self, y: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = y.to_owned();
        for (mut col, &m) in out.axis_iter_mut(Axis(1)).zip(&self.maxima) {
            col.mapv_inplace(|v| v * T::lit(m));
        }
        out
    }
}

/// Scales `train` and every dataset in `others` by the training maxima.
/// Values above the training maximum stay above 1.
pub fn normalize_labels<T: Real>(train: &mut Dataset<T>, others: &mut [Dataset<T>]) -> Result<NormRecord> {
    if train.norm.is_some() || others.iter().any(|d| d.norm.is_some()) {
        return Err(Error::InvalidInput("dataset labels are already normalized".into()));
    }
    let record = NormRecord::from_labels(train.y.view(), &train.spec.name)?;
    for d in std::iter::once(train).chain(others.iter_mut()) {
        d.y = record.normalize(d.y.view());
        d.norm = Some(record.clone());
    }
    Ok(record)
}
