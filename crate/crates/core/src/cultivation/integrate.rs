use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::derivatives;
use super::params::CultivationParams;
use super::state::{CultivationState, STATE_COLUMNS, STATE_DIM};
use crate::error::{Error, Result};
use crate::Real;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 72.0;
pub const DEFAULT_INTERVAL: f64 = 3.0;

/// States sampled at strictly increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<CultivationState<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&CultivationState<T>> {
        self.states.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["time_h"];
        header.extend(STATE_COLUMNS);
        wtr.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut rec = vec![t.as_f64().to_string()];
            rec.extend(s.to_array().iter().map(|v| v.as_f64().to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, origin: &str) -> Result<Self> {
        let obs = super::fit::Observations::<T>::read_csv(r, origin)?;
        let mut states = Vec::with_capacity(obs.times.len());
        for (row, values) in obs.values.iter().enumerate() {
            let mut full = [T::zero(); STATE_DIM];
            for (c, v) in values.iter().enumerate() {
                full[c] = v.ok_or_else(|| Error::Parse {
                    path: origin.to_string(),
                    line: row + 2,
                    msg: format!("missing value for {}", STATE_COLUMNS[c]),
                })?;
            }
            states.push(CultivationState::from_array(full));
        }
        Ok(Trajectory {
            times: obs.times,
            states,
        })
    }
}

fn rk4_step<T: Real>(y: &CultivationState<T>, p: &CultivationParams<T>, h: T) -> CultivationState<T> {
    let half = h / T::lit(2.0);
    let k1 = derivatives(y, p);
    let k2 = derivatives(&y.axpy(half, &k1).clamp_non_negative(), p);
    let k3 = derivatives(&y.axpy(half, &k2).clamp_non_negative(), p);
    let k4 = derivatives(&y.axpy(h, &k3).clamp_non_negative(), p);
    let (a, b, c, d) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    let two = T::lit(2.0);
    let rate = CultivationState::from_array(std::array::from_fn(|i| {
        (a[i] + two * b[i] + two * c[i] + d[i]) / T::lit(6.0)
    }));
    y.axpy(h, &rate).clamp_non_negative()
}

/// Integrates from `times[0]` (state `y0`) and records the state at each
/// requested time. Each gap is split into equal RK4 steps no longer than `dt`.
pub fn simulate<T: Real>(
    y0: &CultivationState<T>,
    params: &CultivationParams<T>,
    times: &[T],
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("no sampling times".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("sampling times must be strictly increasing".into()));
    }
    let mut y = y0.clamp_non_negative();
    let mut states = Vec::with_capacity(times.len());
    states.push(y);
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        // The small slack keeps `gap / dt` that is integral up to rounding from taking an extra step.
        let steps = ((gap / dt) - T::lit(1e-9)).ceil().max(T::one());
        let h = gap / steps;
        let steps = steps.to_usize().unwrap_or(1);
        for i in 0..steps {
            y = rk4_step(&y, params, h);
            if !y.is_finite() {
                let t = w[0] + h * T::from_usize(i + 1).unwrap();
                return Err(Error::NonFinite { time: t.as_f64() });
            }
        }
        states.push(y);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Integrates over `[0, horizon]` sampling every `interval` hours (t = 0 included).
pub fn integrate<T: Real>(
    y0: &CultivationState<T>,
    params: &CultivationParams<T>,
    horizon: T,
    interval: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(horizon > T::zero()) || !(interval > T::zero()) {
        return Err(Error::InvalidInput("horizon and output interval must be > 0".into()));
    }
    let count = (horizon / interval + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let times: Vec<T> = (0..=count).map(|i| interval * T::from_usize(i).unwrap()).collect();
    simulate(y0, params, &times, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn default_sampling_has_25_points() {
        let fx = fixtures::nominal::<f64>();
        let traj = integrate(&fx.initial.state_for_mix(40.0), &fx.params, 72.0, 3.0, DEFAULT_DT).unwrap();
        assert_eq!(traj.len(), 25);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 72.0);
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let fx = fixtures::nominal::<f64>();
        let mut p = fx.params.to_array();
        // growth and production rates
        for i in [0, 1, 5, 6] {
            p[i] = 0.0;
        }
        let y0 = fx.initial.state_for_mix(30.0);
        let traj = integrate(&y0, &CultivationParams::from_array(p), 72.0, 3.0, 0.01).unwrap();
        assert!(traj.states.iter().all(|s| *s == y0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let fx = fixtures::nominal::<f64>();
        let y0 = fx.initial.state_for_mix(0.0);
        assert!(integrate(&y0, &fx.params, 0.0, 3.0, 0.01).is_err());
        assert!(integrate(&y0, &fx.params, 72.0, 3.0, 0.0).is_err());
        assert!(simulate(&y0, &fx.params, &[0.0, 1.0, 1.0], 0.01).is_err());
    }

    #[test]
    fn non_finite_is_reported() {
        let fx = fixtures::nominal::<f64>();
        let mut p = fx.params;
        p.mu_max_f = f64::INFINITY;
        let y0 = fx.initial.state_for_mix(0.0);
        assert!(matches!(
            integrate(&y0, &p, 72.0, 3.0, 0.01),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let fx = fixtures::nominal::<f64>();
        let traj = integrate(&fx.initial.state_for_mix(60.0), &fx.params, 12.0, 3.0, 0.01).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_h,S_f,S_o,N,X_r,P_hb,P_hhx\n"));
        let back = Trajectory::<f64>::read_csv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, traj);
    }
}
