use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::WavenumberGrid;
use crate::error::{Error, Result};
use crate::linalg::{nnls, ThinSvd};
use crate::{rng, Real};

/// Label order shared by the spectra, datasets and models.
pub const SUBSTANCES: [&str; 5] = ["fructose", "urea", "biomass", "hb", "hhx"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Center (1/cm).
    pub center: f64,
    /// Half width at half maximum (1/cm).
    pub width: f64,
    pub height: f64,
}

impl Peak {
    /// Lorentzian line `h·w²/((x−c)² + w²)`.
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.height * self.width * self.width / (d * d + self.width * self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstancePeaks {
    pub name: String,
    pub peaks: Vec<Peak>,
}

/// Peak table for [`generate_components`], read from TOML:
///
/// ```toml
/// jitter = 0.0            # optional std (1/cm) of seeded center jitter
/// [grid]
/// start = 400.0
/// end = 3200.0
/// channels = 1024
/// [[substance]]
/// name = "fructose"
/// peaks = [[628.0, 9.0, 0.6], [1065.0, 12.0, 1.0]]   # [center, width, height]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakTable {
    #[serde(default)]
    pub grid: WavenumberGrid,
    #[serde(default)]
    pub jitter: f64,
    #[serde(rename = "substance")]
    pub substances: Vec<SubstancePeaks>,
}

#[derive(Deserialize)]
struct RawTable {
    #[serde(default)]
    grid: WavenumberGrid,
    #[serde(default)]
    jitter: f64,
    substance: Vec<RawSubstance>,
}

#[derive(Deserialize)]
struct RawSubstance {
    name: String,
    peaks: Vec<[f64; 3]>,
}

impl PeakTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawTable = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("peak table: {e}")))?;
        Ok(PeakTable {
            grid: raw.grid,
            jitter: raw.jitter,
            substances: raw
                .substance
                .into_iter()
                .map(|s| SubstancePeaks {
                    name: s.name,
                    peaks: s
                        .peaks
                        .into_iter()
                        .map(|[center, width, height]| Peak { center, width, height })
                        .collect(),
                })
                .collect(),
        })
    }

    /// The committed default table.
    pub fn default_table() -> Self {
        Self::from_toml(crate::fixtures::PEAKS_TOML).expect("committed peak table parses")
    }
}

/// Per-substance component spectra `H` (`k×m`), rows aligned with `names`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentLibrary<T> {
    pub grid: WavenumberGrid,
    pub names: Vec<String>,
    pub h: Array2<T>,
}

impl<T: Real> ComponentLibrary<T> {
    pub fn new(grid: WavenumberGrid, names: Vec<String>, h: Array2<T>) -> Result<Self> {
        grid.validate()?;
        if h.ncols() != grid.m {
            return Err(Error::DimensionMismatch {
                what: "component channels",
                expected: grid.m,
                got: h.ncols(),
            });
        }
        if h.nrows() != names.len() {
            return Err(Error::DimensionMismatch {
                what: "component names",
                expected: h.nrows(),
                got: names.len(),
            });
        }
        if h.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "component spectra must be finite and non-negative".into(),
            ));
        }
        Ok(ComponentLibrary { grid, names, h })
    }

    pub fn k(&self) -> usize {
        self.h.nrows()
    }

    pub fn m(&self) -> usize {
        self.h.ncols()
    }

    /// Pairwise cosine similarity between component rows.
    pub fn cosine_similarity(&self) -> Array2<T> {
        let norms: Vec<T> = self.h.axis_iter(Axis(0)).map(|r| r.dot(&r).sqrt()).collect();
        let gram = self.h.dot(&self.h.t());
        Array2::from_shape_fn(gram.dim(), |(i, j)| gram[(i, j)] / (norms[i] * norms[j]))
    }

    /// CSV with a `wavenumber` column followed by one column per substance.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["wavenumber".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for j in 0..self.m() {
            let mut rec = vec![self.grid.position(j).to_string()];
            rec.extend(self.h.column(j).iter().map(|v| v.as_f64().to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, origin: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("wavenumber") || headers.len() < 2 {
            return Err(perr(1, "expected `wavenumber` followed by substance columns".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut xs = Vec::new();
        let mut cols: Vec<Vec<T>> = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| perr(line, format!("`{s}` is not a number")))
            };
            xs.push(num(&rec[0])?);
            for (c, col) in cols.iter_mut().enumerate() {
                col.push(T::lit(num(rec.get(c + 1).unwrap_or(""))?));
            }
        }
        if xs.len() < 2 {
            return Err(perr(2, "need at least two channels".into()));
        }
        let grid = WavenumberGrid::new(xs[0], *xs.last().unwrap(), xs.len())?;
        let tol = 1e-6 * grid.step();
        if let Some(j) = (0..xs.len()).find(|&j| (xs[j] - grid.position(j)).abs() > tol) {
            return Err(perr(j + 2, "wavenumbers must be evenly spaced".into()));
        }
        let m = xs.len();
        let h = Array2::from_shape_fn((names.len(), m), |(i, j)| cols[i][j]);
        Self::new(grid, names, h)
    }
}

/// Builds max-normalized Lorentzian component spectra from a peak table.
///
/// When `table.jitter > 0` each peak center is shifted by `N(0, jitter²)`
/// drawn from `seed`; otherwise the output does not depend on the seed.
pub fn generate_components<T: Real>(table: &PeakTable, seed: u64) -> Result<ComponentLibrary<T>> {
    let grid = table.grid;
    grid.validate()?;
    if table.substances.is_empty() {
        return Err(Error::InvalidInput("peak table lists no substances".into()));
    }
    let mut rng = rng::seeded(seed);
    let jitter = (table.jitter > 0.0).then(|| Normal::new(0.0, table.jitter).expect("finite jitter"));
    let xs = grid.positions::<f64>();
    let mut h = Array2::<T>::zeros((table.substances.len(), grid.m));
    for (row, s) in table.substances.iter().enumerate() {
        if s.peaks.is_empty() {
            return Err(Error::InvalidInput(format!("substance `{}` has no peaks", s.name)));
        }
        let mut line = Array1::<f64>::zeros(grid.m);
        for p in &s.peaks {
            if !grid.contains(p.center) {
                return Err(Error::PeakOutOfRange {
                    center: p.center,
                    start: grid.start,
                    end: grid.end,
                });
            }
            if !(p.width > 0.0) || !(p.height > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "peak at {} in `{}` needs positive width and height",
                    p.center, s.name
                )));
            }
            let shift = jitter.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            let peak = Peak {
                center: p.center + shift,
                ..*p
            };
            line.zip_mut_with(&xs, |v, &x| *v += peak.eval(x));
        }
        let max = line.fold(0.0f64, |m, &v| m.max(v));
        for (dst, v) in h.row_mut(row).iter_mut().zip(line.iter()) {
            *dst = T::lit(v / max);
        }
    }
    let names = table.substances.iter().map(|s| s.name.clone()).collect();
    ComponentLibrary::new(grid, names, h)
}

/// Result of [`extract_components`].
#[derive(Clone, Debug)]
pub struct Extraction<T> {
    /// Rows in spectrum units per unit label (not rescaled).
    pub h: Array2<T>,
    /// `‖X − Y H‖_F`
    pub residual: T,
    /// `‖X − Y H‖_F / ‖X‖_F`
    pub relative_residual: T,
}

/// Non-negative least squares fit of `X ≈ Y H` solved channel by channel.
///
/// `Y` is factored once (`Y = U Σ Vᵀ`), which reduces every channel to a
/// `k×k` problem on `Σ Vᵀ` with right-hand side `Uᵀx`.
pub fn extract_components<T: Real>(x: ArrayView2<'_, T>, y: ArrayView2<'_, T>) -> Result<Extraction<T>> {
    let (n, m) = x.dim();
    let (ny, k) = y.dim();
    if ny != n {
        return Err(Error::DimensionMismatch {
            what: "label rows",
            expected: n,
            got: ny,
        });
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "need at least as many samples ({n}) as labels ({k})"
        )));
    }
    if y.iter().any(|&v| v < T::zero()) {
        return Err(Error::InvalidInput("labels must be non-negative".into()));
    }
    let svd = ThinSvd::new(y);
    let cond = svd.condition_number();
    if !(cond <= T::lit(1e10)) {
        return Err(Error::RankDeficient {
            rank: svd.rank(T::lit(1e-10)),
            expected: k,
            condition: cond.as_f64(),
        });
    }
    let r = &svd.v.t() * &svd.sigma.view().insert_axis(Axis(1));
    let projected = svd.u.t().dot(&x);

    let mut h = Array2::<T>::zeros((k, m));
    let mut resid_sq = T::zero();
    for j in 0..m {
        let b = x.column(j);
        let c = projected.column(j);
        let sol = nnls(r.view(), c);
        h.column_mut(j).assign(&sol.x);
        let outside = (b.dot(&b) - c.dot(&c)).max(T::zero());
        resid_sq += outside + sol.residual * sol.residual;
    }
    let total = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    let residual = resid_sq.sqrt();
    Ok(Extraction {
        h,
        residual,
        relative_residual: if total > T::zero() { residual / total } else { residual },
    })
}

/// Homoscedastic Gaussian measurement noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub sigma: T,
    /// Optional per-channel standard deviations overriding `sigma` for synthesis.
    /// Noise compensation only accepts the scalar form.
    #[serde(default)]
    pub per_channel: Option<Vec<T>>,
}

impl<T: Real> NoiseModel<T> {
    pub fn homoscedastic(sigma: T) -> Self {
        NoiseModel {
            sigma,
            per_channel: None,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.sigma >= T::zero()) {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Some(pc) = &self.per_channel {
            if pc.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "per-channel sigma",
                    expected: m,
                    got: pc.len(),
                });
            }
            if pc.iter().any(|s| !(*s >= T::zero())) {
                return Err(Error::InvalidInput("per-channel sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// The single σ required by noise compensation.
    pub fn scalar_sigma(&self) -> Result<T> {
        match self.per_channel {
            None => Ok(self.sigma),
            Some(_) => Err(Error::InvalidInput(
                "noise compensation requires a homoscedastic (scalar) sigma".into(),
            )),
        }
    }

    fn sigma_at(&self, j: usize) -> T {
        self.per_channel.as_ref().map_or(self.sigma, |pc| pc[j])
    }
}

/// A single spectrum on its grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub grid: WavenumberGrid,
    pub intensities: Array1<T>,
}

/// `cᵀH + ε` with `ε ~ N(0, σ²)` per channel.
pub fn synthesize<T: Real, R: Rng + ?Sized>(
    c: &[T],
    library: &ComponentLibrary<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<Spectrum<T>> {
    let mut out = Array1::zeros(library.m());
    synthesize_into(c, library, noise, rng, out.view_mut())?;
    Ok(Spectrum {
        grid: library.grid,
        intensities: out,
    })
}

/// Allocation-free form of [`synthesize`] writing into `out`.
pub fn synthesize_into<T: Real, R: Rng + ?Sized>(
    c: &[T],
    library: &ComponentLibrary<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
    mut out: ndarray::ArrayViewMut1<'_, T>,
) -> Result<()> {
    if c.len() != library.k() {
        return Err(Error::DimensionMismatch {
            what: "concentration vector",
            expected: library.k(),
            got: c.len(),
        });
    }
    if out.len() != library.m() {
        return Err(Error::DimensionMismatch {
            what: "output spectrum",
            expected: library.m(),
            got: out.len(),
        });
    }
    if c.iter().any(|&v| v < T::zero()) {
        return Err(Error::InvalidInput("concentrations must be non-negative".into()));
    }
    out.fill(T::zero());
    for (row, &ci) in library.h.axis_iter(Axis(0)).zip(c) {
        if ci != T::zero() {
            out.scaled_add(ci, &row);
        }
    }
    if noise.sigma > T::zero() || noise.per_channel.is_some() {
        for (j, v) in out.iter_mut().enumerate() {
            let s = noise.sigma_at(j);
            if s > T::zero() {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                *v += s * T::lit(z);
            }
        }
    }
    Ok(())
}
