use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{fit_grid, fit_one, Hyper, ModelSpec, TrainedModel, TrainingSet};
use crate::error::{Error, Result};
use crate::evaluation::auc;
use crate::preprocess::{SamplingMethod, SamplingPlan};
use crate::rng::SeedPath;

/// How folds are formed and how each training fold is resampled.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    /// Keep all rows of an athlete in the same fold.
    pub grouped: bool,
    pub sampling: SamplingMethod,
    pub smote_k: usize,
    pub smote_over_pct: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            grouped: false,
            sampling: SamplingMethod::None,
            smote_k: 5,
            smote_over_pct: 200.0,
        }
    }
}

impl CvOptions {
    pub fn with_sampling(self, sampling: SamplingMethod) -> Self {
        CvOptions { sampling, ..self }
    }

    pub fn sampling_plan(&self, seed: SeedPath) -> SamplingPlan {
        SamplingPlan {
            method: self.sampling,
            smote_k: self.smote_k,
            smote_over_pct: self.smote_over_pct,
            rng_seed: seed.seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    /// Validation fold of every row.
    pub assignment: Vec<usize>,
    pub n_folds: usize,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    pub fn validation_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn training_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Stratified fold assignment. With `groups`, whole groups are placed so that
/// positives spread as evenly as the grouping allows.
pub fn fold_assignment(
    y: &[u8],
    groups: Option<&[u32]>,
    folds: usize,
    seed: SeedPath,
) -> Result<FoldPlan> {
    let mut rng = seed.rng();
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    let mut warnings = Vec::new();
    match groups {
        None => {
            let n_folds = folds.min(n_pos).min(n_neg);
            if n_folds < 2 {
                return Err(Error::InsufficientData(format!(
                    "cross-validation needs at least 2 rows of each class, got {n_pos} positive and {n_neg} negative"
                )));
            }
            if n_folds < folds {
                warnings.push(format!("folds reduced from {folds} to {n_folds}: too few rows in the rarer class"));
            }
            let mut assignment = vec![0; y.len()];
            let mut offset = 0;
            for label in [1u8, 0] {
                let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
                rows.shuffle(&mut rng);
                for (k, &r) in rows.iter().enumerate() {
                    assignment[r] = (offset + k) % n_folds;
                }
                offset = (offset + rows.len()) % n_folds;
            }
            Ok(FoldPlan { assignment, n_folds, warnings })
        }
        Some(groups) => {
            if groups.len() != y.len() {
                return Err(Error::InvalidInput("group and label lengths differ".into()));
            }
            let mut stats: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
            for (&g, &v) in groups.iter().zip(y) {
                let e = stats.entry(g).or_default();
                e.0 += usize::from(v == 1);
                e.1 += 1;
            }
            let with_pos = stats.values().filter(|s| s.0 > 0).count();
            let with_neg = stats.values().filter(|s| s.0 < s.1).count();
            let n_folds = folds.min(with_pos).min(with_neg);
            if n_folds < 2 {
                return Err(Error::InsufficientData(format!(
                    "grouped cross-validation needs at least 2 groups with each class, got {with_pos} and {with_neg}"
                )));
            }
            if n_folds < folds {
                warnings.push(format!("folds reduced from {folds} to {n_folds}: too few groups with each class"));
            }
            let mut ids: Vec<(u32, (usize, usize))> = stats.into_iter().collect();
            ids.shuffle(&mut rng);
            // Most positives first, shuffled order breaking ties.
            ids.sort_by(|a, b| b.1 .0.cmp(&a.1 .0));
            let mut load = vec![(0usize, 0usize); n_folds];
            let mut fold_of = BTreeMap::new();
            for (g, (pos, rows)) in ids {
                let f = (0..n_folds)
                    .min_by_key(|&f| if pos > 0 { (load[f].0, load[f].1) } else { (load[f].1, load[f].0) })
                    .expect("at least two folds");
                load[f].0 += pos;
                load[f].1 += rows;
                fold_of.insert(g, f);
            }
            let assignment = groups.iter().map(|g| fold_of[g]).collect();
            Ok(FoldPlan { assignment, n_folds, warnings })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub hyper: Hyper,
    /// Validation AUC per fold; NaN where the fit failed or the fold lacks a class.
    pub fold_auc: Vec<f64>,
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: FoldPlan,
    pub candidates: Vec<CandidateScore>,
    pub selected: usize,
    /// Out-of-fold scores of the selected candidate, one per training row.
    pub oof_scores: Vec<f64>,
}

impl CvReport {
    pub fn selected_hyper(&self) -> Hyper {
        self.candidates[self.selected].hyper
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let ok: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = ok.len() as f64;
    let m = ok.iter().sum::<f64>() / n;
    let sd = if ok.len() > 1 {
        (ok.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

/// Tune a spec by k-fold cross-validation. Each candidate's AUC is computed on
/// every validation fold; the best mean wins, ties going to the simpler model.
pub fn cross_validate(spec: &ModelSpec, ts: &TrainingSet, opts: &CvOptions, seed: SeedPath) -> Result<CvReport> {
    spec.validate(ts.x.ncols())?;
    let groups = opts.grouped.then_some(ts.groups.as_slice());
    let plan = fold_assignment(&ts.y, groups, spec.folds, seed.child("folds"))?;
    for w in &plan.warnings {
        log::warn!("{}: {w}", spec.family);
    }

    let per_fold: Vec<Vec<std::result::Result<Vec<f64>, String>>> = (0..plan.n_folds)
        .into_par_iter()
        .map(|fold| {
            let fold_seed = seed.child("fold").index(fold as u64);
            let train = ts.subset(&plan.training_rows(fold));
            let valid = ts.subset(&plan.validation_rows(fold));
            let train = match train.resample(&opts.sampling_plan(fold_seed.child("sampling"))) {
                Ok(t) => t,
                Err(e) => return spec.grid.iter().map(|_| Err(e.to_string())).collect(),
            };
            fit_grid(&spec.grid, &train, fold_seed.child("fit"))
                .into_iter()
                .map(|fit| fit.map(|m| m.score(&valid.x)).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();

    let mut candidates = Vec::with_capacity(spec.grid.len());
    let mut oof: Vec<Vec<f64>> = vec![vec![f64::NAN; ts.len()]; spec.grid.len()];
    for (c, hyper) in spec.grid.iter().enumerate() {
        let mut fold_auc = Vec::with_capacity(plan.n_folds);
        let mut failures = Vec::new();
        for (fold, results) in per_fold.iter().enumerate() {
            let rows = plan.validation_rows(fold);
            match &results[c] {
                Ok(scores) => {
                    for (&r, &s) in rows.iter().zip(scores) {
                        oof[c][r] = s;
                    }
                    let labels: Vec<u8> = rows.iter().map(|&r| ts.y[r]).collect();
                    fold_auc.push(auc(scores, &labels).unwrap_or(f64::NAN));
                }
                Err(e) => {
                    failures.push(format!("fold {fold}: {e}"));
                    fold_auc.push(f64::NAN);
                }
            }
        }
        let (mean_auc, sd_auc) = if failures.is_empty() { mean_sd(&fold_auc) } else { (f64::NAN, f64::NAN) };
        candidates.push(CandidateScore {
            hyper: *hyper,
            fold_auc,
            mean_auc,
            sd_auc,
            failures,
        });
    }

    let mut by_simplicity: Vec<usize> = (0..candidates.len()).collect();
    by_simplicity.sort_by(|&a, &b| {
        let (ka, kb) = (candidates[a].hyper.complexity(), candidates[b].hyper.complexity());
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected: Option<usize> = None;
    for c in by_simplicity {
        let m = candidates[c].mean_auc;
        if m.is_finite() && selected.is_none_or(|s| m > candidates[s].mean_auc + 1e-12) {
            selected = Some(c);
        }
    }
    let Some(selected) = selected else {
        let detail = candidates
            .iter()
            .flat_map(|c| c.failures.first().cloned())
            .next()
            .unwrap_or_else(|| "no fold produced a defined AUC".into());
        return Err(Error::Numerical(format!(
            "{}: every candidate failed cross-validation ({detail})",
            spec.family
        )));
    };
    let oof_scores = std::mem::take(&mut oof[selected]);
    Ok(CvReport {
        folds: plan,
        candidates,
        selected,
        oof_scores,
    })
}

/// Tune (when the grid has more than one candidate), resample the full
/// training set with the same protocol, and fit the chosen candidate.
pub fn fit_model(
    spec: &ModelSpec,
    ts: &TrainingSet,
    columns: Vec<String>,
    opts: &CvOptions,
    seed: SeedPath,
) -> Result<TrainedModel> {
    spec.validate(ts.x.ncols())?;
    if columns.len() != ts.x.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} column names for {} columns",
            columns.len(),
            ts.x.ncols()
        )));
    }
    let cv = if spec.grid.len() > 1 {
        Some(cross_validate(spec, ts, opts, seed.child("cv"))?)
    } else {
        None
    };
    let hyper = cv.as_ref().map_or(spec.grid[0], CvReport::selected_hyper);
    let train = ts.resample(&opts.sampling_plan(seed.child("sampling")))?;
    let params = fit_one(&hyper, &train, seed.child("fit"))?;
    Ok(TrainedModel {
        family: spec.family,
        columns,
        hyper,
        params,
        seed: seed.seed(),
        cv,
    })
}
