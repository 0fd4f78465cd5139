use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::svd::ThinSvd;
use crate::Real;

#[derive(Clone, Debug)]
pub struct NnlsSolution<T> {
    pub x: Array1<T>,
    /// `‖A x − b‖₂`
    pub residual: T,
    pub iterations: usize,
}

/// Lawson–Hanson active-set solver for `min ‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls<T: Real>(a: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> NnlsSolution<T> {
    let (n, k) = a.dim();
    assert_eq!(n, b.len(), "nnls: row count of A must match b");

    let scale = a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
        * b.iter().fold(T::zero(), |m, &v| m.max(v.abs())).max(T::one());
    let tol = T::lit(10.0) * T::epsilon() * scale * T::from_usize(n.max(k)).unwrap();

    let mut x = Array1::<T>::zeros(k);
    let mut passive = vec![false; k];
    let max_iter = 3 * k + 10;
    let mut iterations = 0;

    loop {
        let resid = &b - &a.dot(&x);
        let w = a.t().dot(&resid);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = candidate else { break };
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z = solve_subset(a, b, &idx);
            if idx.iter().all(|&i| z[i] > T::zero()) {
                x = z;
                break;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut alpha = T::one();
            for &i in &idx {
                if z[i] <= T::zero() {
                    let step = x[i] / (x[i] - z[i]);
                    if step < alpha {
                        alpha = step;
                    }
                }
            }
            for &i in &idx {
                x[i] = x[i] + alpha * (z[i] - x[i]);
                if x[i] <= tol.max(T::zero()) {
                    x[i] = T::zero();
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }

    let resid = &b - &a.dot(&x);
    let residual = resid.iter().map(|&r| r * r).sum::<T>().sqrt();
    NnlsSolution {
        x,
        residual,
        iterations,
    }
}

/// Unconstrained least squares on the columns in `idx`, scattered back to length `k`.
fn solve_subset<T: Real>(a: ArrayView2<'_, T>, b: ArrayView1<'_, T>, idx: &[usize]) -> Array1<T> {
    let (n, k) = a.dim();
    let mut sub = Array2::<T>::zeros((n, idx.len()));
    for (c, &j) in idx.iter().enumerate() {
        sub.column_mut(c).assign(&a.column(j));
    }
    let pinv = ThinSvd::new(sub.view()).pseudo_inverse(T::epsilon() * T::lit(64.0));
    let zs = pinv.dot(&b);
    let mut z = Array1::<T>::zeros(k);
    for (c, &j) in idx.iter().enumerate() {
        z[j] = zs[c];
    }
    z
}
