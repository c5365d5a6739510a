use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn single<T: Real>(values: DMatrix<T>, mask: DMatrix<bool>) -> GroupedDataset<T> {
    GroupedDataset::new(vec![ModalityMatrix::new("m1", values, mask).unwrap()]).unwrap()
}

fn complete<T: Real>(values: DMatrix<T>) -> GroupedDataset<T> {
    GroupedDataset::new(vec![ModalityMatrix::complete("m1", values)]).unwrap()
}

#[test]
fn standardize_symmetric_triple() {
    let data = complete(DMatrix::from_row_slice(1, 3, &[2.0, 4.0, 6.0]));
    let (out, stats) = standardize(&data).unwrap();
    let m = out.modality("m1").unwrap();
    // Population convention: std = sqrt(8/3).
    let s = (8.0f64 / 3.0).sqrt();
    assert_abs_diff_eq!(m.get(0, 0).unwrap(), -2.0 / s, epsilon = 1e-12);
    assert_abs_diff_eq!(m.get(0, 1).unwrap(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.get(0, 2).unwrap(), 2.0 / s, epsilon = 1e-12);
    assert_abs_diff_eq!(stats.per_modality[0].means[0], 4.0, epsilon = 1e-12);
    assert_abs_diff_eq!(stats.per_modality[0].stds[0], s, epsilon = 1e-12);
}

#[test]
fn standardize_rejects_constant_row() {
    let data = complete(DMatrix::from_row_slice(1, 4, &[3.0, 3.0, 3.0, 3.0]));
    assert!(matches!(
        standardize(&data),
        Err(Error::ZeroVariance { variable: 0, .. })
    ));
}

#[test]
fn standardize_ignores_masked_entries() {
    let values = DMatrix::from_row_slice(1, 3, &[1.0, 9.0, 3.0]);
    let mask = DMatrix::from_row_slice(1, 3, &[true, false, true]);
    let (out, stats) = standardize(&single(values, mask)).unwrap();
    // Stats from {1, 3}: mean 2, population std 1.
    assert_abs_diff_eq!(stats.per_modality[0].means[0], 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(stats.per_modality[0].stds[0], 1.0, epsilon = 1e-12);
    let m = out.modality("m1").unwrap();
    assert_abs_diff_eq!(m.get(0, 0).unwrap(), -1.0, epsilon = 1e-12);
    assert_eq!(m.get(0, 1), None);
    assert_abs_diff_eq!(m.get(0, 2).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn standardize_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = DMatrix::from_fn(4, 20, |_, _| rng.random::<f64>() * 5.0 - 1.0);
    let mut mask = DMatrix::from_element(4, 20, true);
    mask[(2, 3)] = false;
    mask[(0, 11)] = false;
    let data = single(values, mask);
    let (once, _) = standardize(&data).unwrap();
    let (twice, _) = standardize(&once).unwrap();
    let a = once.modality("m1").unwrap();
    let b = twice.modality("m1").unwrap();
    for j in 0..4 {
        for n in 0..20 {
            match (a.get(j, n), b.get(j, n)) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-10),
                (None, None) => {}
                _ => panic!("mask changed"),
            }
        }
    }
}

#[test]
fn standardize_then_invert_restores_values() {
    let values = DMatrix::from_row_slice(2, 3, &[2.0, 4.0, 6.0, -1.0, 0.0, 4.0]);
    let data = complete(values.clone());
    let (std_data, stats) = standardize(&data).unwrap();
    let back = stats.invert(&std_data).unwrap();
    let m = back.modality("m1").unwrap();
    for j in 0..2 {
        for n in 0..3 {
            assert_abs_diff_eq!(m.get(j, n).unwrap(), values[(j, n)], epsilon = 1e-12);
        }
    }
}

#[test]
fn residualize_with_constant_confound_mean_centers() {
    let data = complete(DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 6.0]));
    let confounds = DMatrix::from_element(4, 1, 1.0);
    let out = residualize(&data, &confounds).unwrap();
    let m = out.modality("m1").unwrap();
    let mean = 3.0;
    for n in 0..4 {
        assert_abs_diff_eq!(
            m.get(0, n).unwrap(),
            data.modality("m1").unwrap().get(0, n).unwrap() - mean,
            epsilon = 1e-10
        );
    }
}

#[test]
fn residualize_removes_exact_linear_dependence() {
    let confounds = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let values = DMatrix::from_row_slice(1, 5, &[1.0, 3.0, 5.0, 7.0, 9.0]); // 2c + 1
    let out = residualize(&complete(values), &confounds).unwrap();
    let m = out.modality("m1").unwrap();
    for n in 0..5 {
        assert!(m.get(0, n).unwrap().abs() < 1e-10);
    }
}

#[test]
fn residualize_rejects_rank_deficient_confounds() {
    let mut confounds = DMatrix::zeros(6, 2);
    for i in 0..6 {
        confounds[(i, 0)] = i as f64;
        confounds[(i, 1)] = 2.0 * i as f64; // collinear
    }
    let data = complete(DMatrix::from_fn(1, 6, |_, n| n as f64 * 0.3 + 1.0));
    assert!(matches!(
        residualize(&data, &confounds),
        Err(Error::RankDeficientConfounds)
    ));
}

/// Independent normal-equations solve via Gauss-Jordan elimination.
fn oracle_residuals(y: &[f64], design: &DMatrix<f64>) -> Vec<f64> {
    let p = design.ncols();
    let gtg = design.transpose() * design;
    let gty = design.transpose() * DVector::from_column_slice(y);
    // Gauss-Jordan inverse of gtg.
    let mut aug = DMatrix::zeros(p, 2 * p);
    aug.view_mut((0, 0), (p, p)).copy_from(&gtg);
    for i in 0..p {
        aug[(i, p + i)] = 1.0;
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| aug[(a, col)].abs().partial_cmp(&aug[(b, col)].abs()).unwrap())
            .unwrap();
        aug.swap_rows(col, pivot);
        let d = aug[(col, col)];
        for j in 0..2 * p {
            aug[(col, j)] /= d;
        }
        for row in 0..p {
            if row != col {
                let f = aug[(row, col)];
                for j in 0..2 * p {
                    aug[(row, j)] -= f * aug[(col, j)];
                }
            }
        }
    }
    let inv = aug.view((0, p), (p, p)).into_owned();
    let beta = inv * gty;
    let fitted = design * beta;
    y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
}

#[test]
fn residualize_matches_normal_equations_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // 8 variables x 6 observations, 2 confounds.
    let values = DMatrix::from_fn(8, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let confounds = DMatrix::from_fn(6, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let out = residualize(&complete(values.clone()), &confounds).unwrap();
    let m = out.modality("m1").unwrap();

    let mut design = DMatrix::zeros(6, 3);
    design.view_mut((0, 0), (6, 2)).copy_from(&confounds);
    for i in 0..6 {
        design[(i, 2)] = 1.0;
    }
    for j in 0..8 {
        let y: Vec<f64> = (0..6).map(|n| values[(j, n)]).collect();
        let oracle = oracle_residuals(&y, &design);
        for n in 0..6 {
            assert_abs_diff_eq!(m.get(j, n).unwrap(), oracle[n], epsilon = 1e-9);
        }
    }
}

#[test]
fn residuals_are_orthogonal_to_confounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values = DMatrix::from_fn(3, 30, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let mut mask = DMatrix::from_element(3, 30, true);
    for _ in 0..15 {
        mask[(rng.random_range(0..3), rng.random_range(0..30))] = false;
    }
    let confounds = DMatrix::from_fn(30, 2, |_, _| rng.random::<f64>() - 0.5);
    let out = residualize(&single(values, mask), &confounds).unwrap();
    let m = out.modality("m1").unwrap();
    for j in 0..3 {
        for c in 0..2 {
            let mut inner = 0.0;
            let mut norm_r = 0.0;
            let mut norm_c = 0.0;
            for (n, v) in m.observed_row(j) {
                inner += v * confounds[(n, c)];
                norm_r += v * v;
                norm_c += confounds[(n, c)] * confounds[(n, c)];
            }
            assert!(inner.abs() < 1e-8 * norm_r.sqrt() * norm_c.sqrt() + 1e-12);
        }
    }
}

#[test]
fn split_sizes_and_determinism() {
    let data = complete(DMatrix::from_fn(2, 500, |j, n| (j + n) as f64));
    let s1 = split(&data, 0.8, 42).unwrap();
    let s2 = split(&data, 0.8, 42).unwrap();
    assert_eq!(s1.train.len(), 400);
    assert_eq!(s1.test.len(), 100);
    assert_eq!(s1, s2);
    let mut all: Vec<usize> = s1.train.iter().chain(s1.test.iter()).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..500).collect::<Vec<_>>());
}

#[test]
fn split_rejects_empty_side() {
    let data = complete(DMatrix::from_fn(1, 10, |_, n| n as f64));
    assert!(matches!(
        split(&data, 0.999, 1),
        Err(Error::EmptySplit { side: "test", .. })
    ));
    assert!(split(&data, 0.01, 1).is_err());
}

#[test]
fn remove_entries_exact_count() {
    let data = complete(DMatrix::from_fn(30, 500, |j, n| (j * 500 + n) as f64));
    let out = remove_random_entries(&data, "m1", 0.2, 9).unwrap();
    let m = out.modality("m1").unwrap();
    assert_eq!(m.observed_count(), 30 * 500 - 3000);
}

#[test]
fn remove_entries_zero_fraction_is_identity() {
    let data = complete(DMatrix::from_fn(3, 5, |j, n| (j + n) as f64));
    let out = remove_random_entries(&data, "m1", 0.0, 1).unwrap();
    assert_eq!(out, data);
}

#[test]
fn remove_entries_seed_changes_mask_not_count() {
    let data = complete(DMatrix::from_fn(10, 40, |j, n| (j * n) as f64));
    let a = remove_random_entries(&data, "m1", 0.25, 1).unwrap();
    let b = remove_random_entries(&data, "m1", 0.25, 2).unwrap();
    let ma = a.modality("m1").unwrap();
    let mb = b.modality("m1").unwrap();
    assert_eq!(ma.observed_count(), mb.observed_count());
    assert_ne!(ma.mask(), mb.mask());
}

#[test]
fn remove_entries_unknown_modality() {
    let data = complete(DMatrix::from_fn(2, 4, |_, _| 0.0));
    assert!(matches!(
        remove_random_entries(&data, "nope", 0.1, 0),
        Err(Error::UnknownModality(_))
    ));
}

#[test]
fn remove_rows_masks_whole_observations() {
    let data = complete(DMatrix::from_fn(50, 500, |j, n| (j + n) as f64));
    let out = remove_random_rows(&data, "m1", 0.2, 5).unwrap();
    let m = out.modality("m1").unwrap();
    let mut fully_masked = 0;
    for n in 0..500 {
        let observed = (0..50).filter(|&j| m.is_observed(j, n)).count();
        assert!(observed == 0 || observed == 50);
        if observed == 0 {
            fully_masked += 1;
        }
    }
    assert_eq!(fully_masked, 100);
    // Every row loses exactly the masked observations.
    for j in 0..50 {
        assert_eq!(m.observed_row(j).count(), 400);
    }
}

#[test]
fn remove_tails_masks_roughly_thirty_percent_of_normal_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let values = DMatrix::from_fn(30, 500, |_, _| crate::scalar::standard_normal::<f64, _>(&mut rng));
    let out = remove_tails(&complete(values), "m1", 1.0).unwrap();
    let m = out.modality("m1").unwrap();
    let frac_masked = 1.0 - m.observed_count() as f64 / (30.0 * 500.0);
    // P(|z| > 1) ≈ 0.317 for a unit normal.
    assert!((frac_masked - 0.317).abs() < 0.03, "masked {frac_masked}");
}

#[test]
fn remove_tails_extremes() {
    let values = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]);
    let data = complete(values);
    let identity = remove_tails(&data, "m1", f64::INFINITY).unwrap();
    assert_eq!(identity, data);
    let all = remove_tails(&data, "m1", 0.0).unwrap();
    // Mean is 1.5; no entry equals it, so everything is masked.
    assert_eq!(all.modality("m1").unwrap().observed_count(), 0);
}

#[test]
fn impute_median_basic_and_even_count() {
    let train_values = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 100.0, 1.0, 3.0, 5.0]);
    let mut train_mask = DMatrix::from_element(2, 3, true);
    train_mask[(1, 2)] = false; // row 1 observed {1, 3}
    let train = single(train_values, train_mask);

    let target_values = DMatrix::from_row_slice(2, 2, &[7.0, 0.0, 8.0, 0.0]);
    let target_mask = DMatrix::from_row_slice(2, 2, &[true, false, true, false]);
    let target = single(target_values, target_mask);

    let out = impute_median(&train, &target).unwrap();
    let m = out.modality("m1").unwrap();
    assert_eq!(m.observed_count(), 4);
    assert_abs_diff_eq!(m.get(0, 1).unwrap(), 2.0); // median of {1,2,100}
    assert_abs_diff_eq!(m.get(1, 1).unwrap(), 2.0); // mean of middle pair {1,3}
    assert_abs_diff_eq!(m.get(0, 0).unwrap(), 7.0); // untouched
}

#[test]
fn impute_median_without_missing_is_identity_on_values() {
    let data = complete(DMatrix::from_row_slice(1, 3, &[4.0, 5.0, 6.0]));
    let out = impute_median(&data, &data).unwrap();
    assert_eq!(out, data);
}

#[test]
fn impute_median_needs_observed_training_entries() {
    let values = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    let mask = DMatrix::from_element(1, 2, false);
    let train = single(values.clone(), mask.clone());
    let target = single(values, mask);
    assert!(matches!(
        impute_median(&train, &target),
        Err(Error::TooFewObserved { .. })
    ));
}

#[test]
fn select_observations_keeps_masks() {
    let values = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
    let mask = DMatrix::from_row_slice(1, 4, &[true, false, true, true]);
    let data = single(values, mask);
    let sub = data.select_observations(&[1, 3]);
    let m = sub.modality("m1").unwrap();
    assert_eq!(sub.n_observations(), 2);
    assert_eq!(m.get(0, 0), None);
    assert_eq!(m.get(0, 1), Some(4.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masking_ops_never_unmask_and_count_exactly(
        d in 1usize..6,
        n in 2usize..12,
        frac in 0.0f64..0.9,
        seed in 0u64..1000,
    ) {
        let values = DMatrix::from_fn(d, n, |j, c| (j * n + c) as f64 * 0.1);
        let data = complete(values);
        let pre = remove_random_entries(&data, "m1", 0.3, seed ^ 0xABCD).unwrap();
        let pre_observed = pre.modality("m1").unwrap().observed_count();

        let out = remove_random_entries(&pre, "m1", frac, seed);
        prop_assume!(out.is_ok());
        let out = out.unwrap();
        let m = out.modality("m1").unwrap();
        let target = (frac * (d * n) as f64).round() as usize;
        prop_assert_eq!(m.observed_count(), pre_observed - target);
        // Never unmask.
        for j in 0..d {
            for c in 0..n {
                if !pre.modality("m1").unwrap().is_observed(j, c) {
                    prop_assert!(!m.is_observed(j, c));
                }
            }
        }
        prop_assert_eq!(out.n_observations(), data.n_observations());
    }

    #[test]
    fn split_is_a_partition(n in 3usize..200, frac in 0.05f64..0.95, seed: u64) {
        let data = complete(DMatrix::from_fn(1, n, |_, c| c as f64));
        if let Ok(s) = split(&data, frac, seed) {
            let mut all: Vec<usize> = s.train.iter().chain(s.test.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), (frac * n as f64).round() as usize);
        }
    }
}
