//! Predictive mean matching.
//!
//! For each incomplete column, regress its observed values on the fully
//! observed columns, then fill each gap with the observed value of one of
//! the `donors` rows whose predictions are nearest to the gap row's own
//! prediction. Imputed values therefore always come from the observed
//! support of the column.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

#[derive(Debug, Clone, PartialEq)]
pub struct PmmOptions {
    pub donors: usize,
    pub min_observed: usize,
    /// Used in error messages; falls back to `column {j}`.
    pub column_names: Option<Vec<String>>,
}

impl Default for PmmOptions {
    fn default() -> Self {
        PmmOptions {
            donors: 5,
            min_observed: 10,
            column_names: None,
        }
    }
}

impl PmmOptions {
    fn name(&self, j: usize) -> String {
        self.column_names
            .as_ref()
            .and_then(|n| n.get(j).cloned())
            .unwrap_or_else(|| format!("column {j}"))
    }
}

/// Impute `matrix` using its own observed rows as donors.
pub fn pmm_impute<R: Rng>(
    matrix: &Array2<f64>,
    options: &PmmOptions,
    rng: &mut R,
) -> Result<Array2<f64>> {
    pmm_impute_from(matrix.view(), matrix, options, rng)
}

struct Regression {
    predictors: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    coef: DVector<f64>,
}

impl Regression {
    fn fit(reference: ArrayView2<f64>, rows: &[usize], target: usize, predictors: &[usize]) -> Result<Self> {
        let n = rows.len();
        let q = predictors.len();
        let mut mean = vec![0.0; q];
        let mut scale = vec![1.0; q];
        for (k, &c) in predictors.iter().enumerate() {
            let m = rows.iter().map(|&r| reference[[r, c]]).sum::<f64>() / n as f64;
            let v = rows.iter().map(|&r| (reference[[r, c]] - m).powi(2)).sum::<f64>() / n as f64;
            mean[k] = m;
            scale[k] = if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 };
        }
        let design = DMatrix::from_fn(n, q + 1, |i, k| {
            if k == 0 {
                1.0
            } else {
                (reference[[rows[i], predictors[k - 1]]] - mean[k - 1]) / scale[k - 1]
            }
        });
        let y = DVector::from_fn(n, |i, _| reference[[rows[i], target]]);
        let mut gram = design.transpose() * &design;
        let ridge = 1e-8 * n as f64;
        for k in 1..=q {
            gram[(k, k)] += ridge;
        }
        let rhs = design.transpose() * y;
        let coef = solve_symmetric(gram, &rhs)?;
        Ok(Regression {
            predictors: predictors.to_vec(),
            mean,
            scale,
            coef,
        })
    }

    fn predict(&self, m: ArrayView2<f64>, row: usize) -> f64 {
        self.coef[0]
            + self
                .predictors
                .iter()
                .enumerate()
                .map(|(k, &c)| self.coef[k + 1] * (m[[row, c]] - self.mean[k]) / self.scale[k])
                .sum::<f64>()
    }
}

/// Indices (into `sorted`) of the `k` donors whose predictions are nearest
/// to `value`; `sorted` is ascending by prediction.
fn nearest_donors(sorted: &[(f64, usize)], value: f64, k: usize) -> Vec<usize> {
    let k = k.min(sorted.len());
    let mut hi = sorted.partition_point(|(p, _)| *p < value);
    let mut lo = hi;
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let take_low = match (lo > 0, hi < sorted.len()) {
            (true, true) => (value - sorted[lo - 1].0) <= (sorted[hi].0 - value),
            (true, false) => true,
            (false, true) => false,
            (false, false) => break,
        };
        if take_low {
            lo -= 1;
            out.push(lo);
        } else {
            out.push(hi);
            hi += 1;
        }
    }
    out
}

/// Impute the gaps in `target` using donors drawn from `reference` only.
/// Passing the training matrix as `reference` keeps every regression and
/// donor pool free of test rows.
pub fn pmm_impute_from<R: Rng>(
    reference: ArrayView2<f64>,
    target: &Array2<f64>,
    options: &PmmOptions,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if reference.ncols() != target.ncols() {
        return Err(Error::InvalidInput(format!(
            "reference has {} columns, target {}",
            reference.ncols(),
            target.ncols()
        )));
    }
    if options.donors == 0 {
        return Err(Error::Config("predictive mean matching needs at least one donor".into()));
    }
    let p = target.ncols();
    let complete = |m: ArrayView2<f64>, j: usize| m.column(j).iter().all(|x| !x.is_nan());
    let predictors: Vec<usize> = (0..p)
        .filter(|&j| complete(reference, j) && complete(target.view(), j))
        .collect();

    let mut out = target.clone();
    for j in 0..p {
        let gaps: Vec<usize> = (0..target.nrows())
            .filter(|&r| target[[r, j]].is_nan())
            .collect();
        if gaps.is_empty() {
            continue;
        }
        let observed: Vec<usize> = (0..reference.nrows())
            .filter(|&r| !reference[[r, j]].is_nan())
            .collect();
        if observed.is_empty() {
            return Err(Error::InsufficientData(format!(
                "{} is entirely missing",
                options.name(j)
            )));
        }
        if observed.len() < options.min_observed {
            return Err(Error::InsufficientData(format!(
                "{} has {} observed values; at least {} needed",
                options.name(j),
                observed.len(),
                options.min_observed
            )));
        }
        if predictors.is_empty() {
            return Err(Error::InsufficientData(
                "no fully observed predictor column for predictive mean matching".into(),
            ));
        }
        let reg = Regression::fit(reference, &observed, j, &predictors)?;
        let mut sorted: Vec<(f64, usize)> = observed
            .iter()
            .map(|&r| (reg.predict(reference, r), r))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &r in &gaps {
            let pred = reg.predict(target.view(), r);
            let pool = nearest_donors(&sorted, pred, options.donors);
            let pick = pool[rng.random_range(0..pool.len())];
            out[[r, j]] = reference[[sorted[pick].1, j]];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedPath;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn complete_matrix_is_unchanged() {
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        let mut rng = SeedPath::new(1).rng();
        assert_eq!(pmm_impute(&m, &PmmOptions::default(), &mut rng).unwrap(), m);
    }

    #[test]
    fn exact_match_donor_with_single_donor() {
        // predictor x, target y; the gap row has x = 7, which only row 7 shares.
        let mut m = Array2::zeros((12, 2));
        for i in 0..12 {
            m[[i, 0]] = i as f64;
            m[[i, 1]] = (i * i) as f64;
        }
        m[[11, 0]] = 7.0;
        m[[11, 1]] = f64::NAN;
        let opts = PmmOptions {
            donors: 1,
            ..PmmOptions::default()
        };
        let mut rng = SeedPath::new(3).rng();
        let out = pmm_impute(&m, &opts, &mut rng).unwrap();
        assert_eq!(out[[11, 1]], 49.0);
    }

    #[test]
    fn imputed_values_come_from_observed_support() {
        let mut rng = SeedPath::new(9).rng();
        let n = 200;
        let mut m = Array2::zeros((n, 3));
        for i in 0..n {
            let x: f64 = rng.random();
            m[[i, 0]] = x;
            m[[i, 1]] = 2.0 * x + 0.1 * rng.random::<f64>();
            m[[i, 2]] = -x + rng.random::<f64>();
            if i % 5 == 0 {
                m[[i, 1]] = f64::NAN;
            }
            if i % 7 == 0 {
                m[[i, 2]] = f64::NAN;
            }
        }
        let out = pmm_impute(&m, &PmmOptions::default(), &mut rng).unwrap();
        assert!(out.iter().all(|x| x.is_finite()));
        for j in [1, 2] {
            let support: Vec<f64> = m.column(j).iter().copied().filter(|x| !x.is_nan()).collect();
            for i in 0..n {
                if m[[i, j]].is_nan() {
                    assert!(support.contains(&out[[i, j]]));
                }
            }
        }
    }

    #[test]
    fn entirely_missing_column_is_named() {
        let mut m = Array2::from_elem((12, 2), 1.0);
        m.column_mut(1).fill(f64::NAN);
        let opts = PmmOptions {
            column_names: Some(vec!["age".into(), "distance_ra21".into()]),
            ..PmmOptions::default()
        };
        let err = pmm_impute(&m, &opts, &mut SeedPath::new(1).rng()).unwrap_err();
        assert!(err.to_string().contains("distance_ra21"), "{err}");

        let mut sparse = Array2::from_elem((12, 2), 1.0);
        for i in 0..5 {
            sparse[[i, 1]] = f64::NAN;
        }
        assert!(pmm_impute(&sparse, &PmmOptions::default(), &mut SeedPath::new(1).rng()).is_err());
    }

    #[test]
    fn donor_search_picks_nearest() {
        let sorted: Vec<(f64, usize)> = [0.0, 1.0, 2.0, 3.0, 10.0]
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i))
            .collect();
        let mut d = nearest_donors(&sorted, 2.2, 3);
        d.sort();
        assert_eq!(d, vec![1, 2, 3]);
        assert_eq!(nearest_donors(&sorted, 100.0, 1), vec![4]);
        assert_eq!(nearest_donors(&sorted, -5.0, 10).len(), 5);
    }

    #[test]
    fn test_rows_do_not_leak_into_donors() {
        let reference = array![
            [0.0, 0.0],
            [1.0, 10.0],
            [2.0, 20.0],
            [3.0, 30.0],
            [4.0, 40.0],
            [5.0, 50.0],
            [6.0, 60.0],
            [7.0, 70.0],
            [8.0, 80.0],
            [9.0, 90.0]
        ];
        let target = array![[4.0, f64::NAN], [100.0, 999.0], [-100.0, -999.0]];
        let opts = PmmOptions {
            donors: 1,
            ..PmmOptions::default()
        };
        let out = pmm_impute_from(reference.view(), &target, &opts, &mut SeedPath::new(2).rng())
            .unwrap();
        assert_eq!(out[[0, 1]], 40.0);
    }
}
