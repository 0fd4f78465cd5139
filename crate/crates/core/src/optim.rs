//! Nonlinear least squares.

use ndarray::{Array1, Array2};

use crate::linalg::pseudo_inverse;
use crate::Real;

#[derive(Clone, Copy, Debug)]
pub struct LmConfig<T> {
    pub max_iters: usize,
    /// Stop when an accepted step lowers the cost by less than `rel_tol · cost`,
    /// or moves `x` by less than `rel_tol · (‖x‖ + rel_tol)`.
    pub rel_tol: T,
    /// Central-difference step for the Jacobian.
    pub fd_step: T,
}

impl<T: Real> Default for LmConfig<T> {
    fn default() -> Self {
        LmConfig {
            max_iters: 200,
            rel_tol: T::lit(1e-10),
            fd_step: T::lit(1e-6),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    /// Sum of squared residuals at `x`.
    pub f: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum()
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling and Nielsen's damping
/// update. `residuals` returns `None` where the model cannot be evaluated; such
/// trial points are treated as uphill steps. The starting point must evaluate.
pub fn levenberg_marquardt<T, F>(mut residuals: F, x0: &[T], config: &LmConfig<T>) -> Option<Minimum<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Option<Vec<T>>,
{
    let p = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        residuals(x).filter(|r| r.iter().all(|v| v.is_finite()))
    };

    let mut x = x0.to_vec();
    let mut r = eval(&x)?;
    let mut cost = sum_sq(&r);
    let two = T::lit(2.0);
    let m = r.len();

    let jacobian = |x: &[T], eval: &mut dyn FnMut(&[T]) -> Option<Vec<T>>| -> Option<Array2<T>> {
        let mut j = Array2::zeros((m, p));
        for c in 0..p {
            let h = config.fd_step * (T::one() + x[c].abs());
            let mut xp = x.to_vec();
            xp[c] = x[c] + h;
            let rp = eval(&xp)?;
            xp[c] = x[c] - h;
            let rm = eval(&xp)?;
            for (i, (a, b)) in rp.iter().zip(&rm).enumerate() {
                j[(i, c)] = (*a - *b) / (two * h);
            }
        }
        Some(j)
    };

    let mut converged = cost == T::zero();
    let mut iterations = 0;
    let mut mu = T::zero();
    let mut nu = two;
    let mut fresh = true;
    let mut jtj = Array2::<T>::zeros((p, p));
    let mut grad = Array1::<T>::zeros(p);

    while !converged && iterations < config.max_iters {
        if fresh {
            let Some(j) = jacobian(&x, &mut eval) else { break };
            jtj = j.t().dot(&j);
            grad = j.t().dot(&Array1::from_vec(r.clone()));
            if iterations == 0 {
                let max_diag = (0..p).map(|i| jtj[(i, i)]).fold(T::zero(), T::max);
                mu = T::lit(1e-3) * max_diag;
            }
            fresh = false;
        }
        iterations += 1;

        let floor = T::epsilon() * (0..p).map(|i| jtj[(i, i)]).fold(T::zero(), T::max);
        let diag: Vec<T> = (0..p)
            .map(|i| jtj[(i, i)].max(floor).max(T::min_positive_value()))
            .collect();
        let mut a = jtj.clone();
        for i in 0..p {
            a[(i, i)] += mu * diag[i];
        }
        let step = pseudo_inverse(a.view(), T::epsilon()).dot(&grad).mapv(|v| -v);

        let x_norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let step_norm = step.iter().map(|&v| v * v).sum::<T>().sqrt();
        if step_norm <= config.rel_tol * (x_norm + config.rel_tol) {
            converged = true;
            break;
        }

        let trial: Vec<T> = x.iter().zip(&step).map(|(&a, &d)| a + d).collect();
        let predicted = (0..p).map(|i| step[i] * (mu * diag[i] * step[i] - grad[i])).sum::<T>();
        let gain = match eval(&trial) {
            Some(rt) => {
                let ct = sum_sq(&rt);
                let ratio = if predicted > T::zero() {
                    (cost - ct) / predicted
                } else {
                    -T::one()
                };
                Some((rt, ct, ratio))
            }
            None => None,
        };
        match gain {
            Some((rt, ct, ratio)) if ratio > T::zero() => {
                let drop = cost - ct;
                x = trial;
                r = rt;
                cost = ct;
                fresh = true;
                let t = two * ratio - T::one();
                mu = mu * T::lit(1.0 / 3.0).max(T::one() - t * t * t);
                nu = two;
                if drop <= config.rel_tol * cost || cost == T::zero() {
                    converged = true;
                }
            }
            _ => {
                mu = mu * nu;
                nu = nu * two;
            }
        }
    }

    Some(Minimum {
        x,
        f: cost,
        iterations,
        evaluations,
        converged,
    })
}
