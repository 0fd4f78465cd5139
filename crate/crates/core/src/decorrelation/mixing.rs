use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::augment::{AugmentConfig, Compensation};
use crate::error::{Error, Result};
use crate::linalg::{relative_error, ThinSvd};
use crate::Real;

/// Sampled target labels.
#[derive(Clone, Debug)]
pub struct UniformLabels<T> {
    pub u: Array2<T>,
    /// Columns of `Y` that were all zero; the matching columns of `u` are zero.
    pub degenerate_columns: Vec<usize>,
}

/// Draws `u_ij ~ Uniform(0, max_l Y_lj)` independently for every entry.
pub fn sample_uniform_labels<T: Real, R: Rng + ?Sized>(y: ArrayView2<'_, T>, rng: &mut R) -> UniformLabels<T> {
    let (n, k) = y.dim();
    let upper: Vec<T> = y
        .axis_iter(Axis(1))
        .map(|col| col.iter().fold(T::zero(), |m, &v| m.max(v)))
        .collect();
    let degenerate_columns: Vec<usize> = (0..k).filter(|&j| !(upper[j] > T::zero())).collect();
    let mut u = Array2::<T>::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            let r: f64 = rng.random();
            if upper[j] > T::zero() {
                u[(i, j)] = upper[j] * T::lit(r);
            }
        }
    }
    UniformLabels { u, degenerate_columns }
}

/// Mixing coefficients `Λ` with their per-row sums and sums of squares.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix<T> {
    pub lambda: Array2<T>,
    /// `Σ_j λ_ij`
    pub row_sums: Array1<T>,
    /// `Σ_j λ_ij²`
    pub row_sumsq: Array1<T>,
}

impl<T: Real> MixingMatrix<T> {
    pub fn from_lambda(lambda: Array2<T>) -> Self {
        let row_sums = lambda.sum_axis(Axis(1));
        let row_sumsq = lambda.map_axis(Axis(1), |r| r.iter().map(|&v| v * v).sum());
        MixingMatrix {
            lambda,
            row_sums,
            row_sumsq,
        }
    }

    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }
}

/// Largest accepted `‖ΛY − U‖_F / ‖U‖_F` for the scalar type.
pub(crate) fn solve_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1e3))
}

/// Minimum-norm solution of `Λ Y = U`.
///
/// With the thin SVD `Y = W Σ Vᵀ`, `Λ = U V Σ⁺ Wᵀ = U Y⁺`, where `Σ⁺` inverts
/// singular values above `rank_tol · σ_max` and zeroes the rest. Fails with
/// [`Error::RankDeficient`] when `Y` has rank below `k` or the solve does not
/// reproduce `U`.
pub fn solve_mixing<T: Real>(y: ArrayView2<'_, T>, u: ArrayView2<'_, T>, rank_tol: T) -> Result<MixingMatrix<T>> {
    let (n, k) = y.dim();
    if u.dim() != (n, k) {
        return Err(Error::DimensionMismatch {
            what: "target label shape",
            expected: n * k,
            got: u.len(),
        });
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "batch size {n} is smaller than the label count {k}"
        )));
    }
    let svd = ThinSvd::new(y);
    let rank = svd.rank(rank_tol);
    if rank < k {
        return Err(Error::RankDeficient {
            rank,
            expected: k,
            condition: svd.condition_number().as_f64(),
        });
    }
    let inv_sigma = svd.inverse_sigma(rank_tol);
    // U V Σ⁺ is n×k; multiplying by Wᵀ gives the n×n mixing matrix.
    let left = u.dot(&svd.v) * &inv_sigma.view().insert_axis(Axis(0));
    let lambda = left.dot(&svd.u.t());

    let reproduced = lambda.dot(&y);
    let err = relative_error(reproduced.view(), u);
    if !(err <= solve_tolerance::<T>()) {
        return Err(Error::RankDeficient {
            rank,
            expected: k,
            condition: svd.condition_number().as_f64(),
        });
    }
    Ok(MixingMatrix::from_lambda(lambda))
}

/// `Λ X`: generated sample `i` is `Σ_j λ_ij x_j`.
pub fn mix_spectra<T: Real>(x: ArrayView2<'_, T>, mixing: &MixingMatrix<T>) -> Result<Array2<T>> {
    if mixing.lambda.ncols() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "mixing columns vs spectra rows",
            expected: x.nrows(),
            got: mixing.lambda.ncols(),
        });
    }
    Ok(mixing.lambda.dot(&x))
}

/// Rows that survived filtering, with noise topped up to the source level.
#[derive(Clone, Debug)]
pub struct FilterOutcome<T> {
    pub x: Array2<T>,
    pub y: Array2<T>,
    /// Row indices of the survivors in the mixed batch.
    pub kept: Vec<usize>,
    pub rejected: usize,
}

/// Noise compensation and rejection.
///
/// Row `i` carries mixed noise with variance `s_i σ²`, where `s_i` is
/// `Σ_j λ_ij` ([`Compensation::PaperLinear`]) or `Σ_j λ_ij²`
/// ([`Compensation::VarianceExact`]). Rows with `s_i > 1` are dropped; the
/// others receive fresh noise of variance `(1 − s_i) σ²`.
pub fn compensate_and_filter<T: Real, R: Rng + ?Sized>(
    mixed: ArrayView2<'_, T>,
    labels: ArrayView2<'_, T>,
    mixing: &MixingMatrix<T>,
    config: &AugmentConfig,
    rng: &mut R,
) -> Result<FilterOutcome<T>> {
    let n = mixing.n();
    if mixed.nrows() != n || labels.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "mixed rows",
            expected: n,
            got: mixed.nrows().min(labels.nrows()),
        });
    }
    let sigma = T::lit(config.sigma);
    let s = match config.compensation {
        Compensation::PaperLinear => &mixing.row_sums,
        Compensation::VarianceExact => &mixing.row_sumsq,
    };
    let kept: Vec<usize> = (0..n).filter(|&i| s[i] <= T::one()).collect();
    let mut x = Array2::<T>::zeros((kept.len(), mixed.ncols()));
    let mut y = Array2::<T>::zeros((kept.len(), labels.ncols()));
    for (dst, &i) in kept.iter().enumerate() {
        y.row_mut(dst).assign(&labels.row(i));
        let mut row = x.row_mut(dst);
        row.assign(&mixed.row(i));
        let extra = (T::one() - s[i]) * sigma * sigma;
        if extra > T::zero() {
            let sd = extra.sqrt();
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += sd * T::lit(z);
            }
        }
    }
    Ok(FilterOutcome {
        rejected: n - kept.len(),
        x,
        y,
        kept,
    })
}
