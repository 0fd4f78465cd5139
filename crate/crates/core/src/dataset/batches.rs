use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;

use crate::decorrelation::LabeledBatch;
use crate::error::{Error, Result};
use crate::{rng, Real};

/// Fixed-size mini-batches over `(x, y)`; the incomplete tail is dropped.
pub struct BatchIter<'a, T> {
    x: ArrayView2<'a, T>,
    y: ArrayView2<'a, T>,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl<'a, T: Real> BatchIter<'a, T> {
    /// `shuffle_seed = Some(s)` permutes rows with stream `(s, epoch)`;
    /// `None` keeps insertion order.
    pub fn new(
        x: ArrayView2<'a, T>,
        y: ArrayView2<'a, T>,
        batch_size: usize,
        shuffle_seed: Option<u64>,
        epoch: usize,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "label rows",
                expected: n,
                got: y.nrows(),
            });
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidInput(format!(
                "batch size {batch_size} must lie in [1, {n}]"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        if let Some(seed) = shuffle_seed {
            order.shuffle(&mut rng::substream(seed, epoch as u64));
        }
        Ok(BatchIter {
            x,
            y,
            order,
            batch_size,
            pos: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len() / self.batch_size
    }
}

impl<T: Real> Iterator for BatchIter<'_, T> {
    type Item = LabeledBatch<T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos + self.batch_size > self.order.len() {
            return None;
        }
        let idx = &self.order[self.pos..self.pos + self.batch_size];
        self.pos += self.batch_size;
        let mut x = Array2::<T>::zeros((idx.len(), self.x.ncols()));
        let mut y = Array2::<T>::zeros((idx.len(), self.y.ncols()));
        for (dst, &i) in idx.iter().enumerate() {
            x.row_mut(dst).assign(&self.x.row(i));
            y.row_mut(dst).assign(&self.y.row(i));
        }
        Some(LabeledBatch { x, y })
    }
}

/// Batches of one epoch over a dataset.
pub fn batch_iterator<T: Real>(
    dataset: &super::Dataset<T>,
    batch_size: usize,
    shuffle_seed: Option<u64>,
    epoch: usize,
) -> Result<BatchIter<'_, T>> {
    BatchIter::new(dataset.x.view(), dataset.y.view(), batch_size, shuffle_seed, epoch)
}
