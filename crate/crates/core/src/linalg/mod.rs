//! Small dense kernels generic over [`Real`](crate::Real): a one-sided Jacobi
//! SVD and an active-set non-negative least squares solver.

mod nnls;
mod svd;

pub use nnls::{nnls, NnlsSolution};
pub use svd::{pseudo_inverse, ThinSvd};

use ndarray::{Array2, ArrayView2};

use crate::Real;

/// Frobenius norm of a matrix.
pub fn frobenius<T: Real>(a: ArrayView2<'_, T>) -> T {
    a.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b` is zero.
pub fn relative_error<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> T {
    let diff: Array2<T> = &a - &b;
    let denom = frobenius(b);
    let num = frobenius(diff.view());
    if denom > T::zero() {
        num / denom
    } else {
        num
    }
}
