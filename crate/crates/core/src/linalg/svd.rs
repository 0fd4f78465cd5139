use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::Real;

const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `A = U Σ Vᵀ` of an `n×k` matrix.
///
/// `u` is `n×r`, `sigma` has length `r` (descending) and `v` is `k×r`,
/// with `r = min(n, k)`. Columns of `u` that belong to zero singular values
/// are left as zero vectors.
#[derive(Clone, Debug)]
pub struct ThinSvd<T> {
    pub u: Array2<T>,
    pub sigma: Array1<T>,
    pub v: Array2<T>,
}

impl<T: Real> ThinSvd<T> {
    /// One-sided (Hestenes) Jacobi SVD. Accurate to a few ulps of the largest
    /// singular value, which is what the mixing solve relies on.
    pub fn new(a: ArrayView2<'_, T>) -> Self {
        let (n, k) = a.dim();
        if n < k {
            let t = Self::new(a.t());
            return ThinSvd {
                u: t.v,
                sigma: t.sigma,
                v: t.u,
            };
        }

        let mut work = a.to_owned();
        let mut v = Array2::<T>::eye(k);
        let eps = T::epsilon();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..k {
                for q in (p + 1)..k {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for i in 0..n {
                        let (x, y) = (work[(i, p)], work[(i, q)]);
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (gamma + gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut work, p, q, c, s);
                    rotate(&mut v, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }

        let norms: Vec<T> = work
            .axis_iter(Axis(1))
            .map(|col| col.iter().map(|&x| x * x).sum::<T>().sqrt())
            .collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

        let mut u = Array2::<T>::zeros((n, k));
        let mut sigma = Array1::<T>::zeros(k);
        let mut v_sorted = Array2::<T>::zeros((k, k));
        for (dst, &src) in order.iter().enumerate() {
            let s = norms[src];
            sigma[dst] = s;
            v_sorted.column_mut(dst).assign(&v.column(src));
            if s > T::zero() {
                for i in 0..n {
                    u[(i, dst)] = work[(i, src)] / s;
                }
            }
        }
        ThinSvd { u, sigma, v: v_sorted }
    }

    /// Number of singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: T) -> usize {
        let cutoff = self.cutoff(rel_tol);
        self.sigma.iter().filter(|&&s| s > cutoff).count()
    }

    /// `σ_max / σ_min`, infinite when the smallest singular value is zero.
    pub fn condition_number(&self) -> T {
        match (self.sigma.first(), self.sigma.last()) {
            (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
            (Some(_), Some(_)) => T::infinity(),
            _ => T::one(),
        }
    }

    /// `Σ⁺` as a vector: reciprocals of singular values above the cutoff, zero otherwise.
    pub fn inverse_sigma(&self, rel_tol: T) -> Array1<T> {
        let cutoff = self.cutoff(rel_tol);
        self.sigma.mapv(|s| if s > cutoff { T::one() / s } else { T::zero() })
    }

    fn cutoff(&self, rel_tol: T) -> T {
        rel_tol * self.sigma.first().copied().unwrap_or_else(T::zero)
    }

    /// Moore–Penrose pseudoinverse `V Σ⁺ Uᵀ`.
    pub fn pseudo_inverse(&self, rel_tol: T) -> Array2<T> {
        let inv = self.inverse_sigma(rel_tol);
        let v_scaled = &self.v * &inv.view().insert_axis(Axis(0));
        v_scaled.dot(&self.u.t())
    }
}

#[inline]
fn rotate<T: Real>(m: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Moore–Penrose pseudoinverse with singular values below `rel_tol · σ_max` truncated.
pub fn pseudo_inverse<T: Real>(a: ArrayView2<'_, T>, rel_tol: T) -> Array2<T> {
    ThinSvd::new(a).pseudo_inverse(rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_error;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, k: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, k), |_| rng.random::<f64>())
    }

    #[test]
    fn reconstructs_tall_matrix() {
        let a = random(32, 5, 1);
        let svd = ThinSvd::new(a.view());
        let rebuilt = (&svd.u * &svd.sigma.view().insert_axis(Axis(0))).dot(&svd.v.t());
        assert!(relative_error(rebuilt.view(), a.view()) < 1e-14);
        assert!(svd.sigma.windows(2).into_iter().all(|w| w[0] >= w[1]));
        let utu = svd.u.t().dot(&svd.u);
        assert!(relative_error(utu.view(), Array2::eye(5).view()) < 1e-13);
    }

    #[test]
    fn wide_matrix_goes_through_transpose() {
        let a = random(3, 7, 2);
        let svd = ThinSvd::new(a.view());
        assert_eq!(svd.u.dim(), (3, 3));
        assert_eq!(svd.v.dim(), (7, 3));
        let rebuilt = (&svd.u * &svd.sigma.view().insert_axis(Axis(0))).dot(&svd.v.t());
        assert!(relative_error(rebuilt.view(), a.view()) < 1e-14);
    }

    #[test]
    fn diagonal_singular_values() {
        let a = array![[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        let svd = ThinSvd::new(a.view());
        assert_eq!(svd.sigma.to_vec(), vec![2.0, 1.0]);
        assert_eq!(svd.condition_number(), 2.0);
    }

    #[test]
    fn rank_deficient_truncation() {
        let a = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let svd = ThinSvd::new(a.view());
        assert_eq!(svd.rank(1e-10), 1);
        let pinv = svd.pseudo_inverse(1e-10);
        // A A⁺ A = A still holds for the truncated inverse.
        let back = a.dot(&pinv).dot(&a);
        assert!(relative_error(back.view(), a.view()) < 1e-12);
    }

    #[test]
    fn f32_path() {
        let a = random(16, 4, 3).mapv(|x| x as f32);
        let svd = ThinSvd::new(a.view());
        let rebuilt = (&svd.u * &svd.sigma.view().insert_axis(Axis(0))).dot(&svd.v.t());
        assert!(relative_error(rebuilt.view(), a.view()) < 1e-5);
    }
}
