use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{DatasetKind, DatasetSpec, MixPolicy};
use super::NormRecord;
use crate::cultivation::{integrate, perturb, perturb_initial, CultivationState};
use crate::error::{Error, Result};
use crate::fixtures::CultivationFixture;
use crate::spectra::{synthesize_into, ComponentLibrary, NoiseModel, WavenumberGrid};
use crate::{rng, Real};

/// Where a sample came from; absent fields do not apply (uniform datasets).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub cultivation: Option<u32>,
    pub oil_pct: Option<f64>,
    pub time_h: Option<f64>,
}

/// Spectra `x` (`N×m`) with labels `y` (`N×k`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub spec: DatasetSpec,
    pub grid: WavenumberGrid,
    pub x: Array2<T>,
    pub y: Array2<T>,
    pub meta: Vec<SampleMeta>,
    /// Set once labels have been scaled by [`normalize_labels`](super::normalize_labels).
    pub norm: Option<NormRecord>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Labels in g/L regardless of normalization.
    pub fn raw_labels(&self) -> Array2<T> {
        match &self.norm {
            Some(rec) => rec.denormalize(self.y.view()),
            None => self.y.clone(),
        }
    }

    /// Median over cultivations of the HHx wt.% of the polymer at the last
    /// sampling time. Cultivations without polymer are ignored.
    pub fn terminal_hhx_wt_pct(&self) -> Option<f64> {
        let horizon = self.meta.iter().filter_map(|m| m.time_h).fold(f64::NAN, f64::max);
        if horizon.is_nan() {
            return None;
        }
        let y = self.raw_labels();
        let mut pct: Vec<f64> = y
            .axis_iter(Axis(0))
            .zip(&self.meta)
            .filter(|(_, m)| m.time_h == Some(horizon))
            .filter_map(|(row, _)| {
                let (hb, hhx) = (row[3].as_f64(), row[4].as_f64());
                (hb + hhx > 0.0).then(|| 100.0 * hhx / (hb + hhx))
            })
            .collect();
        if pct.is_empty() {
            return None;
        }
        pct.sort_by(f64::total_cmp);
        let mid = pct.len() / 2;
        Some(if pct.len() % 2 == 1 {
            pct[mid]
        } else {
            0.5 * (pct[mid - 1] + pct[mid])
        })
    }
}

struct CultivationRun<T> {
    oil_pct: f64,
    times: Vec<f64>,
    states: Vec<CultivationState<T>>,
}

fn simulate_cultivation<T: Real>(
    spec: &DatasetSpec,
    fixture: &CultivationFixture<T>,
    policy: MixPolicy,
    index: usize,
    rng: &mut rng::Rng,
) -> Result<CultivationRun<T>> {
    let oil_pct = match policy {
        MixPolicy::PureEither => {
            if rng.random_bool(0.5) {
                100.0
            } else {
                0.0
            }
        }
        MixPolicy::Fixed { mix } => mix.oil_pct,
    };
    let mut last_err = None;
    // One redraw is allowed when a perturbed parameter set blows up.
    for _attempt in 0..2 {
        let params = perturb(&fixture.params, &spec.perturbation, rng);
        let seeded = CultivationState {
            urea: fixture.initial.urea,
            biomass: fixture.initial.biomass,
            ..CultivationState::zero()
        };
        let perturbed = perturb_initial(&seeded, &spec.perturbation, rng);
        let y0 = CultivationState {
            urea: perturbed.urea,
            biomass: perturbed.biomass,
            ..fixture.initial.state_for_mix(oil_pct)
        };
        match integrate(
            &y0,
            &params,
            T::lit(spec.horizon_h),
            T::lit(spec.sample_interval_h),
            T::lit(spec.dt_h),
        ) {
            Ok(traj) => {
                return Ok(CultivationRun {
                    oil_pct,
                    times: traj.times.iter().map(|t| t.as_f64()).collect(),
                    states: traj.states,
                })
            }
            Err(e @ Error::NonFinite { .. }) => {
                log::warn!("{}: cultivation {index} diverged, redrawing", spec.name);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran"))
}

/// Generates one dataset.
///
/// Cultivation datasets perturb the fixture's parameters and initial urea and
/// biomass per cultivation, integrate over the horizon and synthesize one noisy
/// spectrum per sampling time. Uniform datasets need the per-label upper bounds
/// in `label_upper` (the raw training maxima).
pub fn build_dataset<T: Real>(
    spec: &DatasetSpec,
    fixture: &CultivationFixture<T>,
    library: &ComponentLibrary<T>,
    label_upper: Option<&[f64]>,
) -> Result<Dataset<T>> {
    spec.validate()?;
    let k = library.k();
    let m = library.m();
    let noise = NoiseModel::homoscedastic(T::lit(spec.sigma));

    let (x, y, meta) = match spec.kind {
        DatasetKind::Cultivation { mix, n_cultivations } => {
            let per = spec.samples_per_cultivation();
            let chunks: Vec<(Array2<T>, Array2<T>, Vec<SampleMeta>)> = (0..n_cultivations)
                .into_par_iter()
                .map(|c| {
                    let mut rng = rng::substream(spec.seed, c as u64);
                    let run = simulate_cultivation(spec, fixture, mix, c, &mut rng)?;
                    let mut x = Array2::<T>::zeros((per, m));
                    let mut y = Array2::<T>::zeros((per, k));
                    let mut meta = Vec::with_capacity(per);
                    for (i, (s, &t)) in run.states.iter().zip(&run.times).enumerate() {
                        let labels = s.labels();
                        y.row_mut(i).assign(&ndarray::ArrayView1::from(&labels[..]));
                        synthesize_into(&labels, library, &noise, &mut rng, x.row_mut(i))?;
                        meta.push(SampleMeta {
                            cultivation: Some(c as u32),
                            oil_pct: Some(run.oil_pct),
                            time_h: Some(t),
                        });
                    }
                    Ok((x, y, meta))
                })
                .collect::<Result<_>>()?;
            concat(chunks, m, k)
        }
        DatasetKind::Uniform { samples } => {
            let upper = label_upper.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}: uniform datasets need the training label ranges",
                    spec.name
                ))
            })?;
            if upper.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "label ranges",
                    expected: k,
                    got: upper.len(),
                });
            }
            const CHUNK: usize = 1024;
            let chunks: Vec<(Array2<T>, Array2<T>, Vec<SampleMeta>)> = (0..samples.div_ceil(CHUNK))
                .into_par_iter()
                .map(|ci| {
                    let mut rng = rng::substream(spec.seed, ci as u64);
                    let rows = CHUNK.min(samples - ci * CHUNK);
                    let mut x = Array2::<T>::zeros((rows, m));
                    let mut y = Array2::<T>::zeros((rows, k));
                    for i in 0..rows {
                        let labels: Vec<T> = upper.iter().map(|&hi| T::lit(hi * rng.random::<f64>())).collect();
                        y.row_mut(i).assign(&ndarray::ArrayView1::from(&labels[..]));
                        synthesize_into(&labels, library, &noise, &mut rng, x.row_mut(i))?;
                    }
                    let meta = vec![
                        SampleMeta {
                            cultivation: None,
                            oil_pct: None,
                            time_h: None,
                        };
                        rows
                    ];
                    Ok((x, y, meta))
                })
                .collect::<Result<_>>()?;
            concat(chunks, m, k)
        }
    };

    Ok(Dataset {
        spec: spec.clone(),
        grid: library.grid,
        x,
        y,
        meta,
        norm: None,
    })
}

fn concat<T: Real>(
    chunks: Vec<(Array2<T>, Array2<T>, Vec<SampleMeta>)>,
    m: usize,
    k: usize,
) -> (Array2<T>, Array2<T>, Vec<SampleMeta>) {
    let total: usize = chunks.iter().map(|c| c.0.nrows()).sum();
    let mut x = Array2::<T>::zeros((total, m));
    let mut y = Array2::<T>::zeros((total, k));
    let mut meta = Vec::with_capacity(total);
    let mut at = 0;
    for (cx, cy, cm) in chunks {
        let r = cx.nrows();
        x.slice_mut(ndarray::s![at..at + r, ..]).assign(&cx);
        y.slice_mut(ndarray::s![at..at + r, ..]).assign(&cy);
        meta.extend(cm);
        at += r;
    }
    (x, y, meta)
}
