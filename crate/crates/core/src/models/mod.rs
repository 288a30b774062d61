//! Predictor families behind one fit/score contract.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::preprocess::{RowOrigin, SamplingPlan};
use crate::rng::SeedPath;

mod cv;
pub mod forest;
pub mod gee;
pub mod logistic;
pub mod serialize;
pub mod svm;
pub mod univariate;

pub use cv::{
    cross_validate, fit_model, fold_assignment, CandidateScore, CvOptions, CvReport, FoldPlan,
};
pub use forest::{fit_random_forest, ForestParams, RandomForest};
pub use gee::{fit_gee_ar1, GeeModel, GeeOptions};
pub use logistic::{fit_elastic_net, fit_elastic_net_path, ElasticNetOptions, LogisticModel};
pub use svm::{fit_svm, SvmModel, SvmOptions, SvmParams};
pub use univariate::{fit_univariate, UnivariateModel};
pub use serialize::{read_model_file, write_model_file, ModelFile, MODEL_FILE_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelFamily {
    ElasticNet,
    Univariate,
    Gee,
    RandomForest,
    Svm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::ElasticNet,
        ModelFamily::Univariate,
        ModelFamily::Gee,
        ModelFamily::RandomForest,
        ModelFamily::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::ElasticNet => "logistic_elastic_net",
            ModelFamily::Univariate => "univariate_logistic",
            ModelFamily::Gee => "gee_ar1",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Svm => "svm_rbf",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family '{s}'")))
    }
}

/// One point of a family's hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hyper {
    ElasticNet { lambda: f64, alpha: f64 },
    Univariate { column: usize },
    Gee,
    Forest(ForestParams),
    Svm(SvmParams),
}

impl Hyper {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyper::ElasticNet { .. } => ModelFamily::ElasticNet,
            Hyper::Univariate { .. } => ModelFamily::Univariate,
            Hyper::Gee => ModelFamily::Gee,
            Hyper::Forest(_) => ModelFamily::RandomForest,
            Hyper::Svm(_) => ModelFamily::Svm,
        }
    }

    /// Ordering key where smaller means a simpler model: heavier penalty,
    /// fewer or narrower trees, smaller cost and kernel width.
    pub fn complexity(&self) -> [f64; 3] {
        match *self {
            Hyper::ElasticNet { lambda, alpha } => [-lambda, -alpha, 0.0],
            Hyper::Univariate { column } => [column as f64, 0.0, 0.0],
            Hyper::Gee => [0.0; 3],
            Hyper::Forest(p) => [p.trees as f64, p.mtry as f64, -(p.min_leaf as f64)],
            Hyper::Svm(p) => [p.cost, p.gamma, 0.0],
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let ok = match *self {
            Hyper::ElasticNet { lambda, alpha } => lambda >= 0.0 && (0.0..=1.0).contains(&alpha),
            Hyper::Univariate { column } => column < p,
            Hyper::Gee => true,
            Hyper::Forest(f) => f.trees > 0 && f.mtry > 0 && f.mtry <= p && f.min_leaf > 0,
            Hyper::Svm(s) => s.cost > 0.0 && s.gamma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperparameters {self} for {p} columns")))
        }
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyper::ElasticNet { lambda, alpha } => write!(f, "lambda={lambda};alpha={alpha}"),
            Hyper::Univariate { column } => write!(f, "column={column}"),
            Hyper::Gee => f.write_str("ar1"),
            Hyper::Forest(p) => write!(f, "trees={};mtry={};min_leaf={}", p.trees, p.mtry, p.min_leaf),
            Hyper::Svm(p) => write!(f, "cost={};gamma={}", p.cost, p.gamma),
        }
    }
}

/// Family, candidate grid and tuning folds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub grid: Vec<Hyper>,
    pub folds: usize,
}

pub const DEFAULT_FOLDS: usize = 10;

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

impl ModelSpec {
    /// Standard grid for `p` predictor columns.
    pub fn default_for(family: ModelFamily, p: usize) -> Self {
        let grid = match family {
            ModelFamily::ElasticNet => [0.0, 0.5, 1.0]
                .into_iter()
                .flat_map(|alpha| {
                    log_spaced(1e-4, 10.0, 7)
                        .into_iter()
                        .map(move |lambda| Hyper::ElasticNet { lambda, alpha })
                })
                .collect(),
            ModelFamily::Univariate => (0..p).map(|column| Hyper::Univariate { column }).collect(),
            ModelFamily::Gee => vec![Hyper::Gee],
            ModelFamily::RandomForest => {
                let mut m = vec![forest::default_mtry(p), (p / 3).max(1)];
                m.sort_unstable();
                m.dedup();
                m.into_iter()
                    .map(|mtry| Hyper::Forest(ForestParams { trees: 500, mtry, min_leaf: 1 }))
                    .collect()
            }
            ModelFamily::Svm => [0.1, 1.0, 10.0]
                .into_iter()
                .flat_map(|cost| {
                    [0.01, 0.1, 1.0]
                        .into_iter()
                        .map(move |gamma| Hyper::Svm(SvmParams { cost, gamma }))
                })
                .collect(),
        };
        ModelSpec {
            family,
            grid,
            folds: DEFAULT_FOLDS,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config(format!("{}: empty hyperparameter grid", self.family)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("{}: folds must be at least 2", self.family)));
        }
        for h in &self.grid {
            if h.family() != self.family {
                return Err(Error::Config(format!(
                    "{}: grid entry {h} belongs to {}",
                    self.family,
                    h.family()
                )));
            }
            h.validate(p)?;
        }
        Ok(())
    }
}

/// A family with optional grid overrides. Missing axes take their default
/// values, resolved against the column count actually fitted (which PCA
/// changes).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelChoice {
    pub family: ModelFamily,
    pub folds: usize,
    pub lambdas: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub trees: Option<Vec<usize>>,
    pub mtry: Option<Vec<usize>>,
    pub min_leaf: Option<Vec<usize>>,
    pub costs: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
}

impl ModelChoice {
    pub fn new(family: ModelFamily) -> Self {
        ModelChoice {
            family,
            folds: DEFAULT_FOLDS,
            lambdas: None,
            alphas: None,
            trees: None,
            mtry: None,
            min_leaf: None,
            costs: None,
            gammas: None,
        }
    }

    pub fn resolve(&self, p: usize) -> ModelSpec {
        let mut spec = ModelSpec::default_for(self.family, p);
        spec.folds = self.folds;
        match self.family {
            ModelFamily::ElasticNet => {
                let lambdas = self.lambdas.clone().unwrap_or_else(|| log_spaced(1e-4, 10.0, 7));
                let alphas = self.alphas.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
                spec.grid = alphas
                    .iter()
                    .flat_map(|&alpha| lambdas.iter().map(move |&lambda| Hyper::ElasticNet { lambda, alpha }))
                    .collect();
            }
            ModelFamily::RandomForest => {
                let trees = self.trees.clone().unwrap_or_else(|| vec![500]);
                let mtry = self.mtry.clone().map_or_else(
                    || {
                        spec.grid
                            .iter()
                            .filter_map(|h| match h {
                                Hyper::Forest(f) => Some(f.mtry),
                                _ => None,
                            })
                            .collect()
                    },
                    |m| m.into_iter().map(|v| v.min(p.max(1))).collect::<Vec<_>>(),
                );
                let leaves = self.min_leaf.clone().unwrap_or_else(|| vec![1]);
                let mut grid = Vec::new();
                for &t in &trees {
                    for &m in &mtry {
                        for &l in &leaves {
                            let h = Hyper::Forest(ForestParams { trees: t, mtry: m, min_leaf: l });
                            if !grid.contains(&h) {
                                grid.push(h);
                            }
                        }
                    }
                }
                spec.grid = grid;
            }
            ModelFamily::Svm => {
                let costs = self.costs.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
                let gammas = self.gammas.clone().unwrap_or_else(|| vec![0.01, 0.1, 1.0]);
                spec.grid = costs
                    .iter()
                    .flat_map(|&cost| gammas.iter().map(move |&gamma| Hyper::Svm(SvmParams { cost, gamma })))
                    .collect();
            }
            ModelFamily::Univariate | ModelFamily::Gee => {}
        }
        spec
    }
}

/// Rows to fit on, with the athlete grouping and time order GEE needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub groups: Vec<u32>,
    pub order: Vec<i64>,
}

impl TrainingSet {
    /// Every row its own group.
    pub fn new(x: Array2<f64>, y: Vec<u8>) -> Result<Self> {
        let n = y.len();
        Self::with_groups(x, y, (0..n as u32).collect(), vec![0; n])
    }

    pub fn with_groups(x: Array2<f64>, y: Vec<u8>, groups: Vec<u32>, order: Vec<i64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || groups.len() != n || order.len() != n {
            return Err(Error::InvalidInput(format!(
                "training set lengths disagree: {} rows, {} labels, {} groups, {} orders",
                x.nrows(),
                n,
                groups.len(),
                order.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("training matrix has missing or non-finite values".into()));
        }
        Ok(TrainingSet { x, y, groups, order })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet {
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            order: rows.iter().map(|&r| self.order[r]).collect(),
        }
    }

    /// Apply a resampling plan. Synthetic rows get fresh singleton groups.
    pub fn resample(&self, plan: &SamplingPlan) -> Result<TrainingSet> {
        let r = plan.apply(&self.x, &self.y)?;
        let mut next_group = self.groups.iter().copied().max().map_or(0, |g| g + 1);
        let (groups, order) = r
            .origin
            .iter()
            .map(|o| match *o {
                RowOrigin::Original(i) => (self.groups[i], self.order[i]),
                RowOrigin::Synthetic { .. } => {
                    next_group += 1;
                    (next_group - 1, 0)
                }
            })
            .unzip();
        Ok(TrainingSet {
            x: r.x,
            y: r.y,
            groups,
            order,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    ElasticNet(LogisticModel),
    Univariate(UnivariateModel),
    Gee(GeeModel),
    Forest(RandomForest),
    Svm(SvmModel),
}

impl FittedParams {
    pub fn score_row(&self, row: ArrayView1<f64>) -> f64 {
        let slice = |r: ArrayView1<f64>| r.to_vec();
        match self {
            FittedParams::ElasticNet(m) => m.probability(&slice(row)),
            FittedParams::Univariate(m) => m.probability(row[m.column]),
            FittedParams::Gee(m) => m.probability(&slice(row)),
            FittedParams::Forest(f) => f.score_row(&slice(row)),
            FittedParams::Svm(m) => m.decision(row),
        }
    }

    pub fn score(&self, x: &Array2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.score_row(r)).collect()
    }
}

/// Fit every candidate of a grid on one training set. Elastic-net candidates
/// sharing a mixing value are fitted along a warm-started penalty path.
pub fn fit_grid(grid: &[Hyper], ts: &TrainingSet, seed: SeedPath) -> Vec<Result<FittedParams>> {
    let mut out: Vec<Option<Result<FittedParams>>> = (0..grid.len()).map(|_| None).collect();
    let mut alphas: Vec<f64> = grid
        .iter()
        .filter_map(|h| match h {
            Hyper::ElasticNet { alpha, .. } => Some(*alpha),
            _ => None,
        })
        .collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    for alpha in alphas {
        let members: Vec<(usize, f64)> = grid
            .iter()
            .enumerate()
            .filter_map(|(i, h)| match *h {
                Hyper::ElasticNet { lambda, alpha: a } if a == alpha => Some((i, lambda)),
                _ => None,
            })
            .collect();
        let lambdas: Vec<f64> = members.iter().map(|m| m.1).collect();
        let fits = fit_elastic_net_path(&ts.x, &ts.y, alpha, &lambdas, ElasticNetOptions::default());
        for ((i, _), fit) in members.into_iter().zip(fits) {
            out[i] = Some(fit.map(FittedParams::ElasticNet));
        }
    }
    for (i, h) in grid.iter().enumerate() {
        if out[i].is_none() {
            out[i] = Some(fit_one(h, ts, seed.index(i as u64)));
        }
    }
    out.into_iter().map(|r| r.expect("all candidates fitted")).collect()
}

/// Fit a single candidate.
pub fn fit_one(hyper: &Hyper, ts: &TrainingSet, seed: SeedPath) -> Result<FittedParams> {
    hyper.validate(ts.x.ncols())?;
    match *hyper {
        Hyper::ElasticNet { lambda, alpha } => {
            fit_elastic_net(&ts.x, &ts.y, lambda, alpha, ElasticNetOptions::default())
                .map(FittedParams::ElasticNet)
        }
        Hyper::Univariate { column } => {
            let col = ts.x.column(column).to_vec();
            fit_univariate(&col, &ts.y, column).map(FittedParams::Univariate)
        }
        Hyper::Gee => fit_gee_ar1(&ts.x, &ts.y, &ts.groups, &ts.order, GeeOptions::default())
            .map(FittedParams::Gee),
        Hyper::Forest(p) => fit_random_forest(&ts.x, &ts.y, p, seed).map(FittedParams::Forest),
        Hyper::Svm(p) => fit_svm(&ts.x, &ts.y, p, SvmOptions::default()).map(FittedParams::Svm),
    }
}

/// A tuned, fitted model ready to score rows with the same columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub family: ModelFamily,
    pub columns: Vec<String>,
    pub hyper: Hyper,
    pub params: FittedParams,
    pub seed: u64,
    pub cv: Option<CvReport>,
}

impl TrainedModel {
    pub fn score(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "model expects {} columns, got {}",
                self.columns.len(),
                x.ncols()
            )));
        }
        Ok(self.params.score(x))
    }
}
