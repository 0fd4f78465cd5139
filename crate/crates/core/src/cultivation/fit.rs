use std::io::Read;

use serde::Serialize;

use super::integrate::{simulate, DEFAULT_DT};
use super::params::{CultivationParams, PARAM_COUNT, PARAM_NAMES, PHI_HHX};
use super::state::{CultivationState, STATE_COLUMNS, STATE_DIM};
use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, LmConfig};
use crate::Real;

/// Offline measurements; any entry (or whole column) may be missing.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations<T> {
    pub times: Vec<T>,
    /// One row per time, columns in [`STATE_COLUMNS`] order.
    pub values: Vec<[Option<T>; STATE_DIM]>,
}

impl<T: Real> Observations<T> {
    pub fn from_trajectory(traj: &super::Trajectory<T>) -> Self {
        Observations {
            times: traj.times.clone(),
            values: traj.states.iter().map(|s| s.to_array().map(Some)).collect(),
        }
    }

    /// Drops one state column entirely (e.g. oil, which is rarely measured).
    pub fn without_column(mut self, column: usize) -> Self {
        for row in &mut self.values {
            row[column] = None;
        }
        self
    }

    /// Reads `time_h` plus any subset of the state columns. Empty cells are missing.
    pub fn read_csv<R: Read>(r: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(perr(1, "empty file".into()));
        }
        let mut time_col = None;
        let mut map = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            if h == "time_h" {
                time_col = Some(i);
            } else if let Some(c) = STATE_COLUMNS.iter().position(|&n| n == h) {
                map.push((i, c));
            } else {
                return Err(perr(1, format!("unknown column `{h}`")));
            }
        }
        let time_col = time_col.ok_or_else(|| perr(1, "missing `time_h` column".into()))?;

        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let parse = |s: &str| -> Result<T> {
                let v: f64 = s.parse().map_err(|_| perr(line, format!("`{s}` is not a number")))?;
                if !v.is_finite() {
                    return Err(perr(line, format!("non-finite value `{s}`")));
                }
                Ok(T::lit(v))
            };
            let t = rec.get(time_col).unwrap_or("");
            if t.is_empty() {
                return Err(perr(line, "missing time".into()));
            }
            let t = parse(t)?;
            if let Some(&prev) = times.last() {
                if !(t > prev) {
                    return Err(perr(line, "times must be strictly increasing".into()));
                }
            }
            let mut vals = [None; STATE_DIM];
            for &(i, c) in &map {
                let cell = rec.get(i).unwrap_or("");
                if !cell.is_empty() {
                    let v = parse(cell)?;
                    if v < T::zero() {
                        return Err(perr(line, format!("negative concentration {v}")));
                    }
                    vals[c] = Some(v);
                }
            }
            times.push(t);
            values.push(vals);
        }
        if times.is_empty() {
            return Err(perr(2, "no data rows".into()));
        }
        Ok(Observations { times, values })
    }

    /// First observation row with missing entries taken from `fallback`.
    pub fn initial_state(&self, fallback: &CultivationState<T>) -> CultivationState<T> {
        let fallback = fallback.to_array();
        let first = self.values[0];
        CultivationState::from_array(std::array::from_fn(|c| first[c].unwrap_or(fallback[c])))
    }

    /// Largest observed value per column, `None` when the column is unobserved.
    fn column_max(&self) -> [Option<T>; STATE_DIM] {
        std::array::from_fn(|c| {
            self.values
                .iter()
                .filter_map(|r| r[c])
                .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))))
        })
    }

    fn is_constant(&self) -> bool {
        (0..STATE_DIM).all(|c| {
            let vals: Vec<T> = self.values.iter().filter_map(|r| r[c]).collect();
            match vals.first() {
                None => true,
                Some(&v0) => vals
                    .iter()
                    .all(|&v| (v - v0).abs() <= T::epsilon() * v0.abs().max(T::one())),
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub dt: f64,
    /// Weight of a quadratic penalty on the log-distance from the initial guess.
    /// Keeps directions the data cannot resolve near the guess.
    pub prior_weight: f64,
    /// Parameters left free; fixed ones keep their initial-guess value.
    pub free: [bool; PARAM_COUNT],
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iters: 200,
            rel_tol: 1e-10,
            dt: DEFAULT_DT,
            prior_weight: 0.0,
            free: [true; PARAM_COUNT],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport<T> {
    pub params: CultivationParams<T>,
    /// Sum of squared max-scaled residuals, prior term included.
    pub objective: T,
    /// Root-mean-square residual per state column (g/L); `None` when unobserved.
    pub rmse: [Option<T>; STATE_DIM],
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Every observed column is constant, so the parameters are not identifiable.
    pub degenerate: bool,
}

impl<T: Real> FitReport<T> {
    /// Plain-text summary: one `name value` line per parameter.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (n, v) in PARAM_NAMES.iter().zip(self.params.to_array()) {
            out.push_str(&format!("{n:>9} {:.6e}\n", v.as_f64()));
        }
        out
    }
}

/// Least-squares fit of the model to `observations`, searching in log-parameter
/// space (logit for `phi_hhx`) from `initial_guess`. The simulation starts from the first observation
/// row; entries missing there are taken from `fallback_initial`.
pub fn fit_params<T: Real>(
    observations: &Observations<T>,
    initial_guess: &CultivationParams<T>,
    fallback_initial: &CultivationState<T>,
    config: &FitConfig,
) -> Result<FitReport<T>> {
    fit_params_joint(&[(observations.clone(), *fallback_initial)], initial_guess, config)
}

/// One parameter set fitted to several cultivations at once. Each run pairs its
/// observations with the fallback initial state used for its missing first-row
/// entries. Residuals are scaled by the per-column maximum over all runs.
///
/// A single mixed-substrate run rarely pins down the substrate-specific
/// parameters; pure-substrate runs together do.
pub fn fit_params_joint<T: Real>(
    runs: &[(Observations<T>, CultivationState<T>)],
    initial_guess: &CultivationParams<T>,
    config: &FitConfig,
) -> Result<FitReport<T>> {
    if runs.is_empty() {
        return Err(Error::InvalidInput("no observations to fit".into()));
    }
    for (obs, _) in runs {
        let observed_points = obs.values.iter().filter(|r| r.iter().any(Option::is_some)).count();
        if observed_points < 2 {
            return Err(Error::InvalidInput(
                "fitting needs at least two observed time points".into(),
            ));
        }
    }
    initial_guess.validate()?;

    let starts: Vec<CultivationState<T>> = runs.iter().map(|(obs, fallback)| obs.initial_state(fallback)).collect();
    let scale: [T; STATE_DIM] = std::array::from_fn(|c| {
        runs.iter()
            .filter_map(|(obs, _)| obs.column_max()[c])
            .fold(T::zero(), T::max)
    })
    .map(|m| if m > T::zero() { m } else { T::one() });
    let dt = T::lit(config.dt);

    let guess = initial_guess.to_array();
    let free: Vec<usize> = (0..PARAM_COUNT).filter(|&i| config.free[i]).collect();
    // log for positive parameters, logit for the HHx fraction
    let to_search = |i: usize, v: T| {
        if i == PHI_HHX {
            (v / (T::one() - v)).ln()
        } else {
            v.ln()
        }
    };
    let from_search = |i: usize, z: T| {
        if i == PHI_HHX {
            T::one() / (T::one() + (-z).exp())
        } else {
            z.exp()
        }
    };
    let assemble = |z: &[T]| -> CultivationParams<T> {
        let mut v = guess;
        for (&i, &zi) in free.iter().zip(z) {
            v[i] = from_search(i, zi);
        }
        CultivationParams::from_array(v)
    };
    let z0: Vec<T> = free.iter().map(|&i| to_search(i, guess[i])).collect();
    let prior = T::lit(config.prior_weight.max(0.0).sqrt());
    let residuals = |z: &[T]| -> Option<Vec<T>> {
        let p = assemble(z);
        let mut out: Vec<T> = z.iter().zip(&z0).map(|(&a, &b)| prior * (a - b)).collect();
        for ((obs, _), y0) in runs.iter().zip(&starts) {
            let traj = simulate(y0, &p, &obs.times, dt).ok()?;
            for (s, row) in traj.states.iter().zip(&obs.values) {
                let sim = s.to_array();
                for c in 0..STATE_DIM {
                    if let Some(v) = row[c] {
                        out.push((sim[c] - v) / scale[c]);
                    }
                }
            }
        }
        Some(out)
    };

    let lm = LmConfig {
        max_iters: config.max_iters,
        rel_tol: T::lit(config.rel_tol),
        fd_step: LmConfig::<T>::default().fd_step,
    };
    let min = levenberg_marquardt(residuals, &z0, &lm)
        .ok_or_else(|| Error::InvalidInput("the model cannot be integrated at the initial guess".into()))?;
    let params = assemble(&min.x);

    let mut sums = [T::zero(); STATE_DIM];
    let mut counts = [0usize; STATE_DIM];
    for ((obs, _), y0) in runs.iter().zip(&starts) {
        let Ok(traj) = simulate(y0, &params, &obs.times, dt) else {
            continue;
        };
        for (s, row) in traj.states.iter().zip(&obs.values) {
            let sim = s.to_array();
            for c in 0..STATE_DIM {
                if let Some(v) = row[c] {
                    sums[c] += (sim[c] - v) * (sim[c] - v);
                    counts[c] += 1;
                }
            }
        }
    }
    let rmse = std::array::from_fn(|c| (counts[c] > 0).then(|| (sums[c] / T::from_usize(counts[c]).unwrap()).sqrt()));

    let degenerate = runs.iter().all(|(obs, _)| obs.is_constant());
    if !min.converged || degenerate {
        log::warn!(
            "parameter fit did not converge (converged = {}, degenerate = {degenerate})",
            min.converged
        );
    }

    Ok(FitReport {
        params,
        objective: min.f,
        rmse,
        iterations: min.iterations,
        evaluations: min.evaluations,
        converged: min.converged && !degenerate,
        degenerate,
    })
}
