//! Train and test AUC as the training set grows.

use ndarray::Array2;
use rand::seq::index::sample;
use rayon::prelude::*;

use super::roc::auc;
use crate::error::{Error, Result};
use crate::models::{fit_model, CvOptions, ModelChoice, TrainingSet};
use crate::preprocess::{Preprocessor, Protocol};
use crate::rng::SeedPath;

/// Every subsample keeps at least this many positive rows.
pub const MIN_SUBSAMPLE_POSITIVES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurvePlan {
    pub sizes: Vec<usize>,
    pub repeats: usize,
}

/// Ten roughly geometric sizes from 5% of the rows to all of them.
pub fn default_sizes(n: usize) -> Vec<usize> {
    let lo = ((n as f64) * 0.05).round().max(1.0);
    let hi = n as f64;
    let mut sizes: Vec<usize> = (0..10)
        .map(|i| (lo * (hi / lo).powf(i as f64 / 9.0)).round() as usize)
        .collect();
    sizes.dedup();
    sizes
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningPoint {
    pub size: usize,
    /// AUC on the subsample the model was fitted to, one per successful repeat.
    pub train_auc: Vec<f64>,
    pub test_auc: Vec<f64>,
    pub failures: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl LearningPoint {
    pub fn train_mean(&self) -> f64 {
        mean(&self.train_auc)
    }
    pub fn train_sd(&self) -> f64 {
        sd(&self.train_auc)
    }
    pub fn test_mean(&self) -> f64 {
        mean(&self.test_auc)
    }
    pub fn test_sd(&self) -> f64 {
        sd(&self.test_auc)
    }
}

/// Sample `size` rows without replacement, keeping the class ratio and at
/// least two positives. Indices are returned in ascending order.
pub fn stratified_subsample(y: &[u8], size: usize, seed: SeedPath) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 1).collect();
    if size > y.len() {
        return Err(Error::InvalidInput(format!("subsample of {size} from {} rows", y.len())));
    }
    if pos.len() < MIN_SUBSAMPLE_POSITIVES {
        return Err(Error::InsufficientData(format!("only {} positive rows", pos.len())));
    }
    let share = (size as f64 * pos.len() as f64 / y.len() as f64).round() as usize;
    let k_pos = share.max(MIN_SUBSAMPLE_POSITIVES).min(pos.len()).min(size);
    let k_neg = size - k_pos;
    if k_neg > neg.len() || k_neg == 0 {
        return Err(Error::InsufficientData(format!(
            "cannot draw {k_neg} negatives of {} for a subsample of {size}",
            neg.len()
        )));
    }
    let mut rng = seed.rng();
    let mut rows: Vec<usize> = sample(&mut rng, pos.len(), k_pos).into_iter().map(|i| pos[i]).collect();
    rows.extend(sample(&mut rng, neg.len(), k_neg).into_iter().map(|i| neg[i]));
    rows.sort_unstable();
    Ok(rows)
}

fn one_repeat(
    train: &TrainingSet,
    names: &[String],
    test_x: &Array2<f64>,
    test_y: &[u8],
    model: &ModelChoice,
    protocol: Protocol,
    cv: &CvOptions,
    size: usize,
    seed: SeedPath,
) -> Result<(f64, f64)> {
    let rows = stratified_subsample(&train.y, size, seed.child("subsample"))?;
    let mut sub = train.subset(&rows);
    let pre = Preprocessor::fit(&sub.x, protocol.pca)?;
    sub.x = pre.transform(&sub.x);
    let spec = model.resolve(sub.x.ncols());
    let opts = cv.clone().with_sampling(protocol.sampling);
    let fitted = fit_model(&spec, &sub, pre.output_names(names), &opts, seed.child("model"))?;
    let train_auc = auc(&fitted.score(&sub.x)?, &sub.y)?;
    let test_auc = auc(&fitted.score(&pre.transform(test_x))?, test_y)?;
    Ok((train_auc, test_auc))
}

/// For each size, draw `repeats` stratified subsets, refit preprocessing and
/// model on each, and score the subset and the fixed test set. `train.x` and
/// `test_x` are imputed but untransformed.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    train: &TrainingSet,
    names: &[String],
    test_x: &Array2<f64>,
    test_y: &[u8],
    model: &ModelChoice,
    protocol: Protocol,
    cv: &CvOptions,
    plan: &LearningCurvePlan,
    seed: SeedPath,
) -> Result<Vec<LearningPoint>> {
    if plan.repeats == 0 || plan.sizes.is_empty() {
        return Err(Error::Config("learning curve needs sizes and at least one repeat".into()));
    }
    if plan.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("learning-curve sizes must be strictly increasing".into()));
    }
    if let Some(&last) = plan.sizes.last() {
        if last > train.len() {
            return Err(Error::Config(format!(
                "learning-curve size {last} exceeds the {} training rows",
                train.len()
            )));
        }
    }
    if test_x.nrows() != test_y.len() || test_x.ncols() != train.x.ncols() {
        return Err(Error::InvalidInput("test matrix does not match labels or training columns".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..plan.sizes.len())
        .flat_map(|s| (0..plan.repeats).map(move |r| (s, r)))
        .collect();
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let size = plan.sizes[s];
            let seed = seed.child("size").index(size as u64).index(r as u64);
            one_repeat(train, names, test_x, test_y, model, protocol, cv, size, seed)
        })
        .collect();
    let mut points: Vec<LearningPoint> = plan
        .sizes
        .iter()
        .map(|&size| LearningPoint {
            size,
            train_auc: Vec::new(),
            test_auc: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for (&(s, _), res) in jobs.iter().zip(results) {
        match res {
            Ok((tr, te)) => {
                points[s].train_auc.push(tr);
                points[s].test_auc.push(te);
            }
            Err(e) => points[s].failures.push(e.to_string()),
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_five_percent_to_all() {
        let s = default_sizes(9203);
        assert_eq!(s.first(), Some(&460));
        assert_eq!(s.last(), Some(&9203));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subsample_keeps_two_positives() {
        let y: Vec<u8> = (0..1000).map(|i| u8::from(i % 100 == 0)).collect();
        let rows = stratified_subsample(&y, 50, SeedPath::new(3)).unwrap();
        assert_eq!(rows.len(), 50);
        assert_eq!(rows.iter().filter(|&&r| y[r] == 1).count(), 2);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_size_uses_every_row_once() {
        let y: Vec<u8> = (0..200).map(|i| u8::from(i % 7 == 0)).collect();
        let rows = stratified_subsample(&y, 200, SeedPath::new(9)).unwrap();
        assert_eq!(rows, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_request_fails() {
        let y = vec![0, 1, 0, 1];
        assert!(stratified_subsample(&y, 5, SeedPath::new(1)).is_err());
    }
}
