use ndarray::Array2;

use super::roc::rank_biserial;
use crate::error::{Error, Result};

/// Medians of one feature in the two seasons sets and the rank-biserial
/// correlation between them (positive when training values run higher).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContrast {
    pub name: String,
    pub train_median: f64,
    pub test_median: f64,
    pub rank_biserial: f64,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Missing values are ignored column by column.
pub fn describe_features(names: &[String], train: &Array2<f64>, test: &Array2<f64>) -> Result<Vec<FeatureContrast>> {
    if train.ncols() != names.len() || test.ncols() != names.len() {
        return Err(Error::InvalidInput(format!(
            "{} names for {} training and {} test columns",
            names.len(),
            train.ncols(),
            test.ncols()
        )));
    }
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = train.column(j).iter().copied().filter(|v| v.is_finite()).collect();
            let b: Vec<f64> = test.column(j).iter().copied().filter(|v| v.is_finite()).collect();
            let (Some(train_median), Some(test_median)) = (median(&a), median(&b)) else {
                return Err(Error::InsufficientData(format!("no observed values of {name} in one of the sets")));
            };
            Ok(FeatureContrast {
                name: name.clone(),
                train_median,
                test_median,
                rank_biserial: rank_biserial(&a, &b)?,
                n_train: a.len(),
                n_test: b.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn medians_and_effect() {
        let train = array![[1.0, 5.0], [2.0, f64::NAN], [3.0, 5.0]];
        let test = array![[2.0, 5.0], [3.0, 5.0], [4.0, 5.0], [5.0, 5.0]];
        let names = vec!["a".to_string(), "b".to_string()];
        let d = describe_features(&names, &train, &test).unwrap();
        assert_eq!(d[0].train_median, 2.0);
        assert_eq!(d[0].test_median, 3.5);
        assert!(d[0].rank_biserial < 0.0);
        assert_eq!(d[1].n_train, 2);
        assert_eq!(d[1].rank_biserial, 0.0);
    }
}
