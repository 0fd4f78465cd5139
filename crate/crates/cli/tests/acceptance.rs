//! Acceptance suite. Each test prints one `PASS`/`FAIL criterion N` line
//! straight to stderr, so the verdicts show up even under output capture.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use decorr::cultivation::*;
use decorr::dataset::{build_dataset, experiment_specs, DatasetKind, ExperimentScale, NormRecord};
use decorr::decorrelation::*;
use decorr::linalg::relative_error;
use decorr::spectra::{extract_components, generate_components, synthesize, ComponentLibrary, NoiseModel, PeakTable};
use decorr::train::{run_experiment_matrix, ExperimentConfig, LinearRegressor, TrainingSetup};
use decorr::{fixtures, rng};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn verdict(n: u32, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} criterion {n}: {detail}");
    assert!(ok, "criterion {n}: {detail}");
}

fn decorr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_decorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn uniform(n: usize, k: usize, r: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, k), |_| r.random::<f64>())
}

fn library() -> ComponentLibrary<f64> {
    generate_components(&PeakTable::default_table(), 0).unwrap()
}

fn max_abs_pearson(y: &Array2<f64>) -> f64 {
    let n = y.nrows() as f64;
    let mean = y.mean_axis(Axis(0)).unwrap();
    let c = &*y - &mean;
    let cov = c.t().dot(&c) / n;
    let mut worst: f64 = 0.0;
    for a in 0..y.ncols() {
        for b in a + 1..y.ncols() {
            worst = worst.max((cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()).abs());
        }
    }
    worst
}

/// Five labels, the first three strongly coupled through a shared driver.
fn correlated_labels(n: usize, r: &mut impl Rng) -> Array2<f64> {
    let mut y = Array2::zeros((n, 5));
    for mut row in y.rows_mut() {
        let t: f64 = r.random();
        row[0] = t;
        row[1] = 2.0 * t + 0.05 * r.random::<f64>();
        row[2] = 1.0 - 0.8 * t + 0.1 * r.random::<f64>();
        row[3] = r.random();
        row[4] = 0.5 * r.random::<f64>();
    }
    y
}

#[test]
fn criterion_01_mixing_solve() {
    let started = Instant::now();
    let mut r = rng::seeded(101);
    let mut worst: f64 = 0.0;
    let mut solved = 0;
    while solved < 1000 {
        let y = uniform(32, 5, &mut r);
        let u = uniform(32, 5, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
        worst = worst.max(relative_error(m.lambda.dot(&y).view(), u.view()));
        solved += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        worst < 1e-8 && secs < 10.0,
        &format!("max relative residual {worst:.2e} over {solved} batches in {secs:.2} s"),
    );
}

fn pooled_labels(lib: &ComponentLibrary<f64>, mode: AugmentMode, target: usize, seed: u64) -> Array2<f64> {
    let noise = NoiseModel::homoscedastic(0.01);
    let cfg = AugmentConfig {
        mode,
        ..Default::default()
    };
    let mut r = rng::seeded(seed);
    let mut pooled = Array2::zeros((0, 5));
    while pooled.nrows() < target {
        let y = correlated_labels(32, &mut r);
        let mut x = Array2::zeros((32, lib.m()));
        for (i, row) in y.rows().into_iter().enumerate() {
            let s = synthesize(row.as_slice().unwrap(), lib, &noise, &mut r).unwrap();
            x.row_mut(i).assign(&s.intensities);
        }
        let batch = LabeledBatch::new(x, y).unwrap();
        if let Some(b) = augment_batch(&batch, &cfg, &mut r).unwrap().batch {
            for row in b.y.rows() {
                pooled.push_row(row).unwrap();
            }
        }
    }
    pooled
}

#[test]
fn criterion_02_decorrelation() {
    let lib = library();
    let source = correlated_labels(10_000, &mut rng::seeded(102));
    let source_r = max_abs_pearson(&source);
    let pooled = pooled_labels(&lib, AugmentMode::Decorrelate, 10_000, 103);
    let worst = max_abs_pearson(&pooled);
    let filtered = max_abs_pearson(&pooled_labels(&lib, AugmentMode::DecorrelateFilter, 10_000, 104));
    verdict(
        2,
        source_r > 0.9 && worst < 0.05,
        &format!(
            "source max |r| {source_r:.3}, {} pooled samples max |r| {worst:.4} (with filter: {filtered:.4})",
            pooled.nrows()
        ),
    );
}

#[test]
fn criterion_03_noise_compensation() {
    let sigma = 0.01;
    let cfg = AugmentConfig {
        mode: AugmentMode::DecorrelateFilter,
        compensation: Compensation::VarianceExact,
        sigma,
        ..Default::default()
    };
    let m = 64;
    let h = uniform(5, m, &mut rng::seeded(105));
    let mut r = rng::seeded(106);
    let (mut kept, mut sum_sq, mut count, mut worst_sumsq) = (0usize, 0.0, 0usize, 0.0f64);
    while kept < 10_000 {
        let y = correlated_labels(32, &mut r);
        let noisy = y.dot(&h).mapv(|v| {
            let z: f64 = StandardNormal.sample(&mut r);
            v + sigma * z
        });
        let targets = sample_uniform_labels(y.view(), &mut r);
        let mix = solve_mixing(y.view(), targets.u.view(), 1e-10).unwrap();
        let mixed = mix_spectra(noisy.view(), &mix).unwrap();
        let out = compensate_and_filter(mixed.view(), targets.u.view(), &mix, &cfg, &mut r).unwrap();
        let clean = out.y.dot(&h);
        for (row, &i) in out.kept.iter().enumerate() {
            worst_sumsq = worst_sumsq.max(mix.row_sumsq[i]);
            for (a, b) in out.x.row(row).iter().zip(clean.row(row)) {
                sum_sq += (a - b).powi(2);
                count += 1;
            }
        }
        kept += out.kept.len();
    }
    let ratio = sum_sq / count as f64 / (sigma * sigma);
    verdict(
        3,
        (ratio - 1.0).abs() < 0.05 && worst_sumsq <= 1.0,
        &format!("variance ratio {ratio:.4} over {kept} kept samples, max kept Σλ² {worst_sumsq:.4}"),
    );
}

#[test]
fn criterion_04_filtering_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = decorr(&[
        "gen-data",
        "--scale",
        "reduced",
        "--seed",
        "0",
        "--only",
        "train",
        "--out",
        arg(&data),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = tmp.path().join("stats");
    let o = decorr(&[
        "augment-stats",
        "--data",
        arg(&data.join("train")),
        "--mode",
        "decorrelate_filter",
        "--compensation",
        "variance_exact",
        "--batch-size",
        "32",
        "--seed",
        "0",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("rejection_histogram.csv")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/rejection_histogram.csv");
    if std::env::var_os("DECORR_BLESS").is_some() {
        std::fs::write(&golden_path, &csv).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).unwrap_or_default();

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("augment_stats.json")).unwrap()).unwrap();
    let hist: Vec<u64> = doc["stats"]["rejection_histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    let batches: u64 = hist.iter().sum();
    let mean = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| c as f64 * (b as f64 + 0.5) / hist.len() as f64)
        .sum::<f64>()
        / batches as f64;
    let exact = doc["rejection_fraction"].as_f64().unwrap();
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    verdict(
        4,
        exact > 0.25 && occupied > 1 && csv == golden,
        &format!(
            "mean rejection {exact:.3} (bin midpoints {mean:.3}), {occupied} occupied bins over {batches} batches, golden {}",
            if csv == golden { "matches" } else { "differs" }
        ),
    );
}

#[test]
fn criterion_05_nnls_extraction() {
    let lib = library();
    let mut r = rng::seeded(107);
    let y = Array2::from_shape_fn((200, 5), |_| 3.0 * r.random::<f64>());
    let clean = extract_components(y.dot(&lib.h).view(), y.view()).unwrap();
    let exact = relative_error(clean.h.view(), lib.h.view());

    let (n, sigma) = (500, 0.01);
    let y = Array2::from_shape_fn((n, 5), |_| 3.0 * r.random::<f64>());
    let noise = Array2::from_shape_fn((n, lib.m()), |_| {
        let z: f64 = StandardNormal.sample(&mut r);
        sigma * z
    });
    let noisy = extract_components((y.dot(&lib.h) + noise).view(), y.view()).unwrap();
    let ratio = noisy.residual / (sigma * ((n * lib.m()) as f64).sqrt());
    verdict(
        5,
        exact < 1e-6 && (ratio - 1.0).abs() < 0.1,
        &format!("noise-free relative error {exact:.2e}, noisy residual / σ√(nm) = {ratio:.4}"),
    );
}

#[test]
fn criterion_06_gamma_moments() {
    let cfg = PerturbationConfig::default();
    let mut r = rng::seeded(108);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| cfg.weight(&mut r)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    verdict(
        6,
        (mean - 1.0).abs() < 0.003 && (var - 0.2).abs() < 0.01,
        &format!("mean {mean:.5}, variance {var:.5} over {n} draws"),
    );
}

#[test]
fn criterion_07_dataset_ledger() {
    let lib = library();
    let fx = fixtures::nominal::<f64>();
    let specs = experiment_specs(ExperimentScale::FULL, 0);
    let mut counts = Vec::new();
    let mut hhx = Vec::new();
    let mut maxima: Option<Vec<f64>> = None;
    for spec in &specs {
        let upper = match spec.kind {
            DatasetKind::Uniform { .. } => maxima.as_deref(),
            _ => None,
        };
        let d = build_dataset(spec, &fx, &lib, upper).unwrap();
        if spec.name == "train" {
            maxima = Some(NormRecord::from_labels(d.y.view(), "train").unwrap().maxima);
        }
        if let Some(pct) = d
            .meta
            .first()
            .and_then(|m| m.oil_pct)
            .filter(|_| spec.name.starts_with("val_"))
        {
            hhx.push((spec.name.clone(), pct, d.terminal_hhx_wt_pct().unwrap()));
        }
        counts.push(d.len());
    }
    let ledger_ok = counts == [50_000, 10_000, 10_000, 10_000, 10_000, 10_000, 10_000, 50_000];
    let hhx_ok = hhx.len() == 6 && hhx.iter().all(|(_, pct, h)| (h - 0.2 * pct).abs() <= 0.5);
    let summary: Vec<String> = hhx.iter().map(|(n, _, h)| format!("{n} {h:.2}")).collect();
    verdict(
        7,
        ledger_ok && hhx_ok,
        &format!("counts {counts:?}; terminal HHx wt.% {}", summary.join(", ")),
    );
}

#[test]
fn criterion_08_experiment_ordering() {
    let started = Instant::now();
    let config = ExperimentConfig::new(ExperimentScale::REDUCED, 0, 25);
    let report = run_experiment_matrix(&config, &fixtures::nominal::<f64>(), &library()).unwrap();
    let mean = |s| report.row_mean(s).unwrap();
    let (nc, filter, plain, dec) = (
        mean(TrainingSetup::NoCorrelation),
        mean(TrainingSetup::CultivationDecorrelateFilter),
        mean(TrainingSetup::Cultivation),
        mean(TrainingSetup::CultivationDecorrelate),
    );
    verdict(
        8,
        nc < filter && filter < plain && plain < dec,
        &format!(
            "row means over {} seeds: no_corr {nc:.4}, decorrelate_filter {filter:.4}, plain {plain:.4}, decorrelate {dec:.4} ({:.0} s)",
            config.seeds.len(),
            started.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_gradient_check() {
    let (n, m, k, l2, h) = (10, 8, 3, 0.1, 1e-5);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut r = rng::seeded(200 + seed);
        let x = uniform(n, m, &mut r);
        let y = uniform(n, k, &mut r);
        let mut model = LinearRegressor::standardized_on(x.view(), k, None);
        model.w = uniform(m, k, &mut r) - 0.5;
        model.b = Array1::from_shape_fn(k, |_| r.random::<f64>() - 0.5);
        let g = model.gradient(x.view(), y.view(), l2);
        let loss = |p: &LinearRegressor<f64>| p.gradient(x.view(), y.view(), l2).loss;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for idx in 0..m * k + k {
            let (mut p, mut q) = (model.clone(), model.clone());
            let analytic = if idx < m * k {
                let (i, j) = (idx / k, idx % k);
                p.w[(i, j)] += h;
                q.w[(i, j)] -= h;
                g.w[(i, j)]
            } else {
                p.b[idx - m * k] += h;
                q.b[idx - m * k] -= h;
                g.b[idx - m * k]
            };
            let numeric = (loss(&p) - loss(&q)) / (2.0 * h);
            diff += (analytic - numeric).powi(2);
            norm += analytic * analytic;
        }
        worst = worst.max((diff / norm).sqrt());
    }
    verdict(
        9,
        worst < 1e-6,
        &format!("max relative gradient error {worst:.2e} over 20 instances"),
    );
}

#[test]
fn criterion_10_ode_properties() {
    let fx = fixtures::nominal::<f64>();
    let cfg = PerturbationConfig::default();
    let mut violations = 0;
    for seed in 0..1000u64 {
        let mut r = rng::seeded(300 + seed);
        let p = perturb(&fx.params, &cfg, &mut r);
        let oil = if r.random::<bool>() {
            100.0
        } else {
            r.random_range(0.0..100.0)
        };
        let y0 = perturb_initial(&fx.initial.state_for_mix(oil), &cfg, &mut r);
        let traj = integrate(&y0, &p, DEFAULT_HORIZON, DEFAULT_INTERVAL, DEFAULT_DT).unwrap();
        let negative = traj.states.iter().any(|s| s.to_array().iter().any(|&v| v < 0.0));
        let non_monotone = traj
            .states
            .windows(2)
            .any(|w| w[1].fructose > w[0].fructose || w[1].oil > w[0].oil || w[1].urea > w[0].urea);
        violations += usize::from(negative || non_monotone);
    }

    let y0 = fx.initial.state_for_mix(50.0);
    let run = |h: f64| simulate(&y0, &fx.params, &[0.0, 24.0], h).unwrap().states[1].to_array();
    let reference = run(0.5 / 8.0);
    let err = |a: [f64; 6]| {
        a.iter()
            .zip(&reference)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = err(run(0.5)) / err(run(0.25));

    let runs: Vec<_> = [0.0, 100.0]
        .iter()
        .map(|&oil| {
            let y0 = fx.initial.state_for_mix(oil);
            let traj = integrate(&y0, &fx.params, DEFAULT_HORIZON, DEFAULT_INTERVAL, DEFAULT_DT).unwrap();
            (Observations::from_trajectory(&traj), y0)
        })
        .collect();
    let guess = CultivationParams::from_array(fx.params.to_array().map(|v| 1.2 * v));
    let fit = fit_params_joint(&runs, &guess, &FitConfig::default()).unwrap();
    let worst_param = fit
        .params
        .to_array()
        .iter()
        .zip(fx.params.to_array())
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0, f64::max);

    verdict(
        10,
        violations == 0 && (ratio - 16.0).abs() <= 0.3 * 16.0 && fit.converged && worst_param <= 0.01,
        &format!(
            "{violations} of 1000 perturbed runs violate sign or monotonicity; RK4 error ratio {ratio:.2}; \
             worst recovered parameter off by {:.4}%",
            100.0 * worst_param
        ),
    );
}

#[test]
fn criterion_11_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut sums = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = decorr(&[
            "reproduce",
            "--seed",
            "7",
            "--scale",
            "reduced",
            "--epochs",
            "2",
            "--out",
            arg(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        sums.push(std::fs::read_to_string(out.join("checksums.txt")).unwrap());
    }
    let files = sums[0].lines().count();
    verdict(
        11,
        files > 0 && sums[0] == sums[1],
        &format!(
            "two `reproduce --seed 7` runs, {files} files, checksums {}",
            if sums[0] == sums[1] { "identical" } else { "differ" }
        ),
    );
}
