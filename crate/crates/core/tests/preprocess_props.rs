use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loadwatch::preprocess::{
    pca_fit, pca_transform, pmm_impute, pmm_impute_from, smote, standardize, undersample,
    PmmOptions, Preprocessor, RowOrigin, SamplingMethod, SamplingPlan, Standardizer,
};

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Array2<f64>> {
    (rows, cols).prop_flat_map(|(n, p)| {
        prop::collection::vec(-100.0..100.0f64, n * p)
            .prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
    })
}

fn correlated(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 10.0);
    Array2::from_shape_fn((n, p), |(i, j)| {
        base[[i, j % 2]] * (j + 1) as f64 + 0.3 * rng.random::<f64>()
    })
}

proptest! {
    #[test]
    fn standardized_columns_have_zero_mean_unit_sd(m in matrix(3..40, 1..6)) {
        let (z, s) = standardize(&m).unwrap();
        let n = z.nrows() as f64;
        for (j, col) in z.columns().into_iter().enumerate() {
            let mean = col.sum() / n;
            prop_assert!(mean.abs() < 1e-9);
            if s.scales[j] != 1.0 {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
        let back = s.invert(&z);
        for (a, b) in back.iter().zip(m.iter()) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn pca_loadings_are_orthonormal(seed in 0u64..500, p in 2usize..8, threshold in 0.5..=1.0f64) {
        let m = correlated(60, p, seed);
        let proj = pca_fit(&m, threshold).unwrap();
        let gram = proj.loadings.t().dot(&proj.loadings);
        for i in 0..proj.n_components {
            for j in 0..proj.n_components {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - want).abs() < 1e-9);
            }
        }
        prop_assert!(proj.explained.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((proj.explained.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // Smallest k reaching the threshold.
        prop_assert!(proj.cumulative_explained() >= threshold - 1e-9);
        let before: f64 = proj.explained[..proj.n_components - 1].iter().sum();
        prop_assert!(before < threshold);
        // Scores are uncorrelated with variance equal to the eigenvalues.
        let scores = pca_transform(&m, &proj);
        let cov = scores.t().dot(&scores) / (m.nrows() as f64 - 1.0);
        for i in 0..proj.n_components {
            prop_assert!((cov[[i, i]] - proj.explained[i] * p as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn undersampling_balances_and_keeps_minority(pos in 1usize..30, neg in 1usize..200, seed in 0u64..1000) {
        let y: Vec<u8> = (0..pos + neg).map(|i| u8::from(i < pos)).collect();
        let x = Array2::from_shape_fn((pos + neg, 2), |(i, j)| (i * 10 + j) as f64);
        let r = undersample(&x, &y, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let small = pos.min(neg);
        prop_assert_eq!(r.y.len(), 2 * small);
        prop_assert_eq!(r.y.iter().filter(|&&v| v == 1).count(), small);
        let minority = if pos <= neg { 1 } else { 0 };
        let kept: Vec<usize> = r.origin.iter().map(|o| match o {
            RowOrigin::Original(i) => *i,
            RowOrigin::Synthetic { .. } => usize::MAX,
        }).collect();
        for i in (0..y.len()).filter(|&i| y[i] == minority) {
            prop_assert!(kept.contains(&i));
        }
        for (row, &i) in r.x.rows().into_iter().zip(&kept) {
            prop_assert_eq!(row, x.row(i));
        }
    }

    #[test]
    fn smote_counts(m in 2usize..25, extra in 0usize..200, over in prop::sample::select(vec![0.0, 100.0, 150.0, 200.0, 300.0]), seed in 0u64..1000) {
        let n_maj = m * 5 + extra;
        let y: Vec<u8> = (0..m + n_maj).map(|i| u8::from(i < m)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((y.len(), 3), |_| rng.random::<f64>());
        let r = smote(&x, &y, 5, over, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let synth = (m as f64 * over / 100.0).round() as usize;
        prop_assert_eq!(r.origin.iter().filter(|o| o.is_synthetic()).count(), synth);
        let pos = r.y.iter().filter(|&&v| v == 1).count();
        prop_assert_eq!(pos, m + synth);
        prop_assert_eq!(r.y.len() - pos, (m + synth).min(n_maj));
    }
}

#[test]
fn standardize_example() {
    let (z, s) = standardize(&array![[1.0], [2.0], [3.0]]).unwrap();
    assert_eq!(s.means, vec![2.0]);
    assert_eq!(s.scales, vec![1.0]);
    assert_eq!(z, array![[-1.0], [0.0], [1.0]]);

    let (z, s) = standardize(&array![[5.0, 1.0], [5.0, 3.0]]).unwrap();
    assert_eq!(s.scales[0], 1.0);
    assert_eq!(z.column(0).to_vec(), vec![0.0, 0.0]);

    let test = s.apply(&array![[7.0, 2.0]]);
    assert_eq!(test[[0, 0]], 2.0);
    assert!(Standardizer::fit(&array![[f64::NAN]]).is_err());
}

#[test]
fn pca_on_perfectly_correlated_columns_needs_one_component() {
    let m = Array2::from_shape_fn((20, 3), |(i, j)| (i as f64) * (j as f64 + 1.0) + j as f64);
    let proj = pca_fit(&m, 0.95).unwrap();
    assert_eq!(proj.n_components, 1);
    let recon = proj.reconstruct(&pca_transform(&m, &proj));
    for (a, b) in recon.iter().zip(m.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
    let full = pca_fit(&correlated(40, 4, 2), 1.0).unwrap();
    assert_eq!(full.n_components, 4);
    let m = correlated(40, 4, 2);
    let recon = full.reconstruct(&pca_transform(&m, &full));
    for (a, b) in recon.iter().zip(m.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(pca_fit(&m, 0.0).is_err());
    assert!(matches!(Preprocessor::fit(&m, true).unwrap(), Preprocessor::Pca(_)));
}

#[test]
fn pmm_draws_from_observed_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 150;
    let mut m = Array2::from_shape_fn((n, 4), |(i, j)| (i as f64 * 0.1).sin() * (j + 1) as f64 + rng.random::<f64>());
    for i in (0..n).step_by(7) {
        m[[i, 2]] = f64::NAN;
    }
    for i in (3..n).step_by(11) {
        m[[i, 3]] = f64::NAN;
    }
    let out = pmm_impute(&m, &PmmOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for j in [2, 3] {
        let support: Vec<f64> = m.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
        for i in 0..n {
            if m[[i, j]].is_nan() {
                assert!(support.contains(&out[[i, j]]));
            } else {
                assert_eq!(out[[i, j]], m[[i, j]]);
            }
        }
    }
    assert_eq!(out, pmm_impute(&m, &PmmOptions::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap());

    // Gaps in a second matrix are filled only from the reference rows.
    let mut test = Array2::from_shape_fn((30, 4), |(i, j)| 1000.0 + (i + j) as f64);
    for i in 0..30 {
        test[[i, 2]] = f64::NAN;
    }
    let filled = pmm_impute_from(m.view(), &test, &PmmOptions::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let support: Vec<f64> = m.column(2).iter().copied().filter(|v| !v.is_nan()).collect();
    assert!(filled.column(2).iter().all(|v| support.contains(v)));

    let complete = correlated(20, 3, 1);
    assert_eq!(pmm_impute(&complete, &PmmOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), complete);

    let mut sparse = correlated(20, 3, 1);
    for i in 0..15 {
        sparse[[i, 1]] = f64::NAN;
    }
    let err = pmm_impute(&sparse, &PmmOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
    assert!(err.to_string().contains("observed"));
}

#[test]
fn undersample_example() {
    let y: Vec<u8> = (0..100).map(|i| u8::from(i < 10)).collect();
    let x = Array2::from_shape_fn((100, 1), |(i, _)| i as f64);
    let r = undersample(&x, &y, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(r.y.len(), 20);
    assert!(undersample(&x, &[1; 100], &mut ChaCha8Rng::seed_from_u64(3)).is_err());
}

#[test]
fn smote_examples() {
    let x = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 6.0], [7.0, 7.0], [8.0, 8.0]];
    let y = [1, 1, 0, 0, 0, 0];
    let r = smote(&x, &y, 1, 100.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let synthetic: Vec<_> = r.x.rows().into_iter().zip(&r.origin).filter(|(_, o)| o.is_synthetic()).map(|(row, _)| row.to_owned()).collect();
    assert_eq!(synthetic.len(), 2);
    for row in synthetic {
        assert_eq!(row[0], row[1]);
        assert!((0.0..=1.0).contains(&row[0]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<u8> = (0..210).map(|i| u8::from(i < 10)).collect();
    let x = Array2::from_shape_fn((210, 2), |_| rng.random::<f64>());
    let plan = SamplingPlan { method: SamplingMethod::Smote, smote_k: 5, smote_over_pct: 300.0, rng_seed: 12 };
    let r = plan.apply(&x, &y).unwrap();
    let pos = r.y.iter().filter(|&&v| v == 1).count();
    assert_eq!(pos, 40);
    assert!((r.y.len() as i64 - 2 * pos as i64).abs() <= 1);
    assert_eq!(r, plan.apply(&x, &y).unwrap());
    let other = SamplingPlan { rng_seed: 13, ..plan.clone() }.apply(&x, &y).unwrap();
    assert_ne!(r.x, other.x);

    assert!(smote(&x, &(0..210).map(|i| u8::from(i == 0)).collect::<Vec<_>>(), 5, 100.0, &mut rng).is_err());
}
