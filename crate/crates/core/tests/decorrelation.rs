use decorr::decorrelation::*;
use decorr::linalg::relative_error;
use decorr::rng;
use decorr::spectra::{generate_components, synthesize, ComponentLibrary, NoiseModel, PeakTable};
use nalgebra::DMatrix;
use ndarray::{array, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_matrix(n: usize, k: usize, r: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, k), |_| r.random::<f64>())
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_na(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn max_abs_pearson(y: &Array2<f64>) -> f64 {
    let cols: Vec<Vec<f64>> = y.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            worst = worst.max(pearson(&cols[i], &cols[j]).abs());
        }
    }
    worst
}

fn library() -> ComponentLibrary<f64> {
    generate_components(&PeakTable::default_table(), 0).unwrap()
}

/// Batch of labels in which the first two columns are nearly collinear.
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
fn two_by_two_mixing_matches_direct_inverse() {
    let y = array![[1.0, 0.0], [0.0, 2.0]];
    let u = array![[1.0, 1.0], [1.0, 0.0]];
    let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
    let want = array![[1.0, 0.5], [1.0, 0.0]];
    assert!(relative_error(m.lambda.view(), want.view()) < 1e-14);
}

#[test]
fn square_mixing_matches_nalgebra_inverse() {
    let mut r = rng::seeded(1);
    for _ in 0..50 {
        let y = random_matrix(5, 5, &mut r);
        let u = random_matrix(5, 5, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-12).unwrap();
        let inv = to_na(&y).try_inverse().unwrap();
        let want = from_na(&(to_na(&u) * inv));
        assert!(relative_error(m.lambda.view(), want.view()) < 1e-9);
    }
}

#[test]
fn tall_mixing_matches_nalgebra_pseudo_inverse() {
    let mut r = rng::seeded(2);
    for _ in 0..50 {
        let y = random_matrix(32, 5, &mut r);
        let u = random_matrix(32, 5, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
        let pinv = to_na(&y).pseudo_inverse(1e-12).unwrap();
        let want = from_na(&(to_na(&u) * pinv));
        assert!(relative_error(m.lambda.view(), want.view()) < 1e-10);
    }
}

#[test]
fn thousand_batch_residual_sweep() {
    let mut r = rng::seeded(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let y = random_matrix(32, 5, &mut r);
        let u = random_matrix(32, 5, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
        worst = worst.max(relative_error(m.lambda.dot(&y).view(), u.view()));
    }
    assert!(worst < 1e-8, "worst residual {worst}");
}

#[test]
fn identity_targets_give_the_column_space_projector() {
    let mut r = rng::seeded(4);
    let y = random_matrix(12, 3, &mut r);
    let m = solve_mixing(y.view(), y.view(), 1e-10).unwrap();
    let l = &m.lambda;
    assert!(relative_error(l.dot(&y).view(), y.view()) < 1e-12);
    assert!(relative_error(l.t(), l.view()) < 1e-12);
    assert!(relative_error(l.dot(l).view(), l.view()) < 1e-12);
    let trace: f64 = (0..12).map(|i| l[(i, i)]).sum();
    assert!((trace - 3.0).abs() < 1e-10);
}

#[test]
fn rank_deficient_labels_are_refused() {
    let mut r = rng::seeded(5);
    let mut y = random_matrix(10, 3, &mut r);
    let c0 = y.column(0).to_owned();
    y.column_mut(2).assign(&(&c0 * 2.0));
    let u = random_matrix(10, 3, &mut r);
    assert!(matches!(
        solve_mixing(y.view(), u.view(), 1e-10),
        Err(decorr::Error::RankDeficient { .. })
    ));
}

#[test]
fn uniform_targets_respect_column_maxima() {
    let y = array![[2.0, 0.5, 0.0], [1.0, 1.0, 0.0], [0.0, 0.2, 0.0]];
    let u = sample_uniform_labels(y.view(), &mut rng::seeded(6));
    assert_eq!(u.degenerate_columns, vec![2]);
    for row in u.u.rows() {
        assert!((0.0..=2.0).contains(&row[0]));
        assert!((0.0..=1.0).contains(&row[1]));
        assert_eq!(row[2], 0.0);
    }
    let zeros = Array2::<f64>::zeros((4, 2));
    let u = sample_uniform_labels(zeros.view(), &mut rng::seeded(6));
    assert!(u.u.iter().all(|&v| v == 0.0));
    assert_eq!(u.degenerate_columns, vec![0, 1]);
}

#[test]
fn uniform_target_columns_are_independent() {
    let mut r = rng::seeded(7);
    let y = correlated_labels(100_000, &mut r);
    let u = sample_uniform_labels(y.view(), &mut r);
    assert!(max_abs_pearson(&u.u) < 0.01);
}

#[test]
fn mixing_with_identity_keeps_spectra() {
    let mut r = rng::seeded(8);
    let x = random_matrix(6, 10, &mut r);
    let m = MixingMatrix::from_lambda(Array2::eye(6));
    assert_eq!(mix_spectra(x.view(), &m).unwrap(), x);
}

#[test]
fn half_half_mix_is_the_spectrum_of_the_mean_label() {
    let lib = library();
    let noise = NoiseModel::homoscedastic(0.0);
    let mut r = rng::seeded(9);
    let y1 = [1.0, 0.3, 2.0, 0.1, 0.0];
    let y2 = [0.2, 0.9, 0.5, 0.4, 0.3];
    let mut x = Array2::zeros((3, lib.m()));
    x.row_mut(0)
        .assign(&synthesize(&y1, &lib, &noise, &mut r).unwrap().intensities);
    x.row_mut(1)
        .assign(&synthesize(&y2, &lib, &noise, &mut r).unwrap().intensities);
    let mut lambda = Array2::zeros((1, 3));
    lambda[(0, 0)] = 0.5;
    lambda[(0, 1)] = 0.5;
    let mixed = mix_spectra(x.view(), &MixingMatrix::from_lambda(lambda)).unwrap();
    let mean: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 0.5 * (a + b)).collect();
    let want = synthesize(&mean, &lib, &noise, &mut r).unwrap().intensities;
    let err = (&mixed.row(0) - &want).iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(err < 1e-14);
}

#[test]
fn compensation_rows_by_mode() {
    let cfg = |c| AugmentConfig {
        mode: AugmentMode::DecorrelateFilter,
        compensation: c,
        sigma: 0.01,
        ..Default::default()
    };
    let lambda = array![[0.0, 1.0, 0.0], [0.6, 0.8, 0.0]];
    let m = MixingMatrix::from_lambda(lambda);
    let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
    let mixed = mix_spectra(x.view(), &m).unwrap();
    let labels = array![[1.0], [2.0]];

    let exact = compensate_and_filter(
        mixed.view(),
        labels.view(),
        &m,
        &cfg(Compensation::VarianceExact),
        &mut rng::seeded(1),
    )
    .unwrap();
    assert_eq!(exact.kept, vec![0, 1]);
    assert_eq!(exact.x.row(0), mixed.row(0));
    assert!((&exact.x.row(1) - &mixed.row(1)).iter().all(|v: &f64| v.abs() < 1e-12));

    let linear = compensate_and_filter(
        mixed.view(),
        labels.view(),
        &m,
        &cfg(Compensation::PaperLinear),
        &mut rng::seeded(1),
    )
    .unwrap();
    assert_eq!(linear.kept, vec![0]);
    assert_eq!(linear.rejected, 1);
    assert_eq!(linear.x.row(0), mixed.row(0));
}

#[test]
fn compensated_noise_matches_source_noise() {
    let sigma = 0.01;
    let cfg = AugmentConfig {
        mode: AugmentMode::DecorrelateFilter,
        sigma,
        ..Default::default()
    };
    let m = 64;
    let h = {
        let mut r = rng::seeded(10);
        random_matrix(5, m, &mut r)
    };
    let mut r = rng::seeded(11);
    let (mut kept, mut sum_sq, mut count) = (0usize, 0.0, 0usize);
    while kept < 10_000 {
        let y = correlated_labels(32, &mut r);
        let clean = y.dot(&h);
        let noisy = clean.mapv(|v| {
            let z: f64 = StandardNormal.sample(&mut r);
            v + sigma * z
        });
        let targets = sample_uniform_labels(y.view(), &mut r);
        let mix = solve_mixing(y.view(), targets.u.view(), 1e-10).unwrap();
        let mixed = mix_spectra(noisy.view(), &mix).unwrap();
        let out = compensate_and_filter(mixed.view(), targets.u.view(), &mix, &cfg, &mut r).unwrap();
        let expected = out.y.dot(&h);
        for (row, &i) in out.kept.iter().enumerate() {
            assert!(mix.row_sumsq[i] <= 1.0);
            for (a, b) in out.x.row(row).iter().zip(expected.row(row)) {
                sum_sq += (a - b).powi(2);
                count += 1;
            }
        }
        kept += out.kept.len();
    }
    let var = sum_sq / count as f64;
    assert!(
        (var / (sigma * sigma) - 1.0).abs() < 0.05,
        "variance ratio {}",
        var / (sigma * sigma)
    );
}

fn pooled_labels(mode: AugmentMode, target: usize) -> Array2<f64> {
    let lib = library();
    let noise = NoiseModel::homoscedastic(0.01);
    let cfg = AugmentConfig {
        mode,
        ..Default::default()
    };
    let mut r = rng::seeded(12);
    let mut pooled = Array2::zeros((0, 5));
    while pooled.nrows() < target {
        let y = correlated_labels(32, &mut r);
        let mut x = Array2::zeros((32, lib.m()));
        for (i, row) in y.rows().into_iter().enumerate() {
            x.row_mut(i).assign(
                &synthesize(row.as_slice().unwrap(), &lib, &noise, &mut r)
                    .unwrap()
                    .intensities,
            );
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
fn augmented_labels_are_decorrelated() {
    let mut r = rng::seeded(13);
    let source = correlated_labels(10_000, &mut r);
    assert!(max_abs_pearson(&source) > 0.9);
    let pooled = pooled_labels(AugmentMode::Decorrelate, 10_000);
    let worst = max_abs_pearson(&pooled);
    assert!(worst < 0.05, "|r| = {worst}");
}

#[test]
fn augment_modes_and_stats() {
    let lib = library();
    let mut r = rng::seeded(14);
    let y = correlated_labels(32, &mut r);
    let x = y.dot(&lib.h);
    let batch = LabeledBatch::new(x, y).unwrap();

    let off = augment_batch(&batch, &AugmentConfig::default(), &mut r).unwrap();
    assert_eq!(off.batch.as_ref(), Some(&batch));
    assert_eq!(off.stats, AugmentStats::default());

    let dec = AugmentConfig {
        mode: AugmentMode::Decorrelate,
        ..Default::default()
    };
    let out = augment_batch(&batch, &dec, &mut r).unwrap();
    assert_eq!(out.batch.unwrap().len(), 32);
    assert_eq!(out.stats.samples_generated, 32);
    assert_eq!(out.stats.samples_rejected, 0);

    let filt = AugmentConfig {
        mode: AugmentMode::DecorrelateFilter,
        ..Default::default()
    };
    let mut total = AugmentStats::default();
    for _ in 0..50 {
        total.merge(&augment_batch(&batch, &filt, &mut r).unwrap().stats);
    }
    assert_eq!(total.batches_processed, 50);
    assert_eq!(total.samples_generated + total.samples_rejected, 50 * 32);
    assert_eq!(total.rejection_histogram.iter().sum::<u64>(), 50);
}

#[test]
fn augmentation_is_deterministic() {
    let lib = library();
    let mut r = rng::seeded(15);
    let y = correlated_labels(32, &mut r);
    let x = y.dot(&lib.h);
    let batch = LabeledBatch::new(x, y).unwrap();
    let cfg = AugmentConfig {
        mode: AugmentMode::DecorrelateFilter,
        ..Default::default()
    };
    let a = augment_batch(&batch, &cfg, &mut rng::seeded(99)).unwrap();
    let b = augment_batch(&batch, &cfg, &mut rng::seeded(99)).unwrap();
    assert_eq!(a.batch, b.batch);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn too_small_batches_are_refused() {
    let y = Array2::from_shape_fn((5, 5), |(i, j)| if i == j { 1.0 } else { 0.0 });
    let batch = LabeledBatch::new(y.clone(), y).unwrap();
    let cfg = AugmentConfig {
        mode: AugmentMode::Decorrelate,
        ..Default::default()
    };
    assert!(augment_batch(&batch, &cfg, &mut rng::seeded(0)).is_err());
}

fn stats_strategy() -> impl Strategy<Value = AugmentStats> {
    prop::collection::vec((1usize..64, 0usize..64), 0..8).prop_map(|v| {
        let mut s = AugmentStats::default();
        for (n, rej) in v {
            s.merge(&AugmentStats::single(n, rej.min(n)));
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_reproduces_targets(seed in any::<u64>(), n in 6usize..48, k in 1usize..6) {
        let mut r = rng::seeded(seed);
        let y = random_matrix(n, k, &mut r);
        let u = random_matrix(n, k, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
        prop_assert!(relative_error(m.lambda.dot(&y).view(), u.view()) < 1e-8);
    }

    #[test]
    fn solution_has_minimum_norm(seed in any::<u64>(), n in 4usize..20) {
        let k = 3;
        let mut r = rng::seeded(seed);
        let y = random_matrix(n, k, &mut r);
        let u = random_matrix(n, k, &mut r);
        let m = solve_mixing(y.view(), u.view(), 1e-10).unwrap();
        let pinv = from_na(&to_na(&y).pseudo_inverse(1e-12).unwrap());
        let projector = Array2::<f64>::eye(n) - y.dot(&pinv);
        let a = random_matrix(n, n, &mut r) - 0.5;
        let null = a.dot(&projector);
        prop_assert!(null.dot(&y).iter().all(|v| v.abs() < 1e-9));
        let norm = |x: &Array2<f64>| x.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(norm(&(&m.lambda + &null)) >= norm(&m.lambda) * (1.0 - 1e-12));
    }

    #[test]
    fn stats_merge_is_associative_and_commutative(
        a in stats_strategy(), b in stats_strategy(), c in stats_strategy()
    ) {
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ab_c = ab.clone();
        ab_c.merge(&c);
        let mut bc = b.clone();
        bc.merge(&c);
        let mut a_bc = a.clone();
        a_bc.merge(&bc);
        prop_assert_eq!(&ab_c, &a_bc);
        let mut ba = b.clone();
        ba.merge(&a);
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn every_batch_is_counted_once(n in 6usize..64, rejected in 0usize..64) {
        let s = AugmentStats::single(n, rejected.min(n));
        prop_assert_eq!(s.samples_generated + s.samples_rejected, n as u64);
        prop_assert_eq!(s.rejection_histogram.iter().sum::<u64>(), 1);
    }
}
