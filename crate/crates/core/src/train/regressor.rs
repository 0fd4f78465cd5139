use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::NormRecord;
use crate::Real;

/// A model mapping spectra (`n×m`) to normalized labels (`n×k`).
pub trait Regressor<T: Real> {
    fn predict_batch(&self, x: ArrayView2<'_, T>) -> Array2<T>;

    fn predict(&self, spectrum: ArrayView1<'_, T>) -> Array1<T> {
        let x = spectrum.insert_axis(Axis(0));
        self.predict_batch(x).row(0).to_owned()
    }

    /// Label normalization the model was trained under.
    fn norm(&self) -> Option<&NormRecord>;
}

/// A regressor trainable by mini-batch gradient steps on squared error.
pub trait GradientModel<T: Real>: Regressor<T> {
    /// One SGD step; returns the batch loss before the update.
    fn sgd_step(&mut self, x: ArrayView2<'_, T>, y: ArrayView2<'_, T>, lr: T, l2: T) -> T;

    fn is_finite(&self) -> bool;
}

/// Affine model `ŷ = ((x − offset) / scale) W + b`.
///
/// `offset` and `scale` are fixed input standardization (training mean
/// spectrum and RMS deviation); only `W` (`m×k`) and `b` are learned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor<T> {
    pub offset: Array1<T>,
    pub scale: T,
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub norm: Option<NormRecord>,
}

/// Batch objective and its gradient.
#[derive(Clone, Debug)]
pub struct Gradient<T> {
    pub loss: T,
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> LinearRegressor<T> {
    pub fn zeros(m: usize, k: usize) -> Self {
        LinearRegressor {
            offset: Array1::zeros(m),
            scale: T::one(),
            w: Array2::zeros((m, k)),
            b: Array1::zeros(k),
            norm: None,
        }
    }

    /// Zero-initialized model standardized on `x`.
    pub fn standardized_on(x: ArrayView2<'_, T>, k: usize, norm: Option<NormRecord>) -> Self {
        let (n, m) = x.dim();
        let offset = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(m));
        let mut ss = T::zero();
        for row in x.rows() {
            for (v, o) in row.iter().zip(offset.iter()) {
                let d = *v - *o;
                ss += d * d;
            }
        }
        let rms = (ss / T::from_usize(n.max(1)).unwrap()).sqrt();
        LinearRegressor {
            offset,
            scale: if rms > T::zero() { rms } else { T::one() },
            w: Array2::zeros((m, k)),
            b: Array1::zeros(k),
            norm,
        }
    }

    fn features(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let centered = &x - &self.offset.view().insert_axis(Axis(0));
        centered / self.scale
    }

    /// `L = 1/(2n) Σ_i ‖ŷ_i − y_i‖² + (l2/2) ‖W‖²_F` and its gradient.
    pub fn gradient(&self, x: ArrayView2<'_, T>, y: ArrayView2<'_, T>, l2: T) -> Gradient<T> {
        let n = T::from_usize(x.nrows().max(1)).unwrap();
        let f = self.features(x);
        let err = f.dot(&self.w) + &self.b.view().insert_axis(Axis(0)) - &y;
        let half = T::lit(0.5);
        let loss =
            half * err.iter().map(|&e| e * e).sum::<T>() / n + half * l2 * self.w.iter().map(|&w| w * w).sum::<T>();
        let gw = f.t().dot(&err) / n + &(&self.w * l2);
        let gb = err.sum_axis(Axis(0)) / n;
        Gradient { loss, w: gw, b: gb }
    }
}

impl<T: Real> Regressor<T> for LinearRegressor<T> {
    fn predict_batch(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        self.features(x).dot(&self.w) + &self.b.view().insert_axis(Axis(0))
    }

    fn norm(&self) -> Option<&NormRecord> {
        self.norm.as_ref()
    }
}

impl<T: Real> GradientModel<T> for LinearRegressor<T> {
    fn sgd_step(&mut self, x: ArrayView2<'_, T>, y: ArrayView2<'_, T>, lr: T, l2: T) -> T {
        let g = self.gradient(x, y, l2);
        self.w.scaled_add(-lr, &g.w);
        self.b.scaled_add(-lr, &g.b);
        g.loss
    }

    fn is_finite(&self) -> bool {
        self.w.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}
