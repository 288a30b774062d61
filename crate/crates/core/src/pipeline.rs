//! Assembly of the modelling pipeline: cohort tables to labeled panel,
//! per-run imputation, train-fitted preprocessing and model fitting.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::domain::{
    build_daily_panel, split_by_season, Cohort, DailyPanel, OutcomeKey, PanelOptions,
    SessionRecord, SessionType, SplitDataset,
};
use crate::error::{Error, Result};
use crate::evaluation::auc;
use crate::load_metrics::{build_feature_matrix, build_load_series, FeatureConfig, FeatureMatrix};
use crate::models::{fit_model, CvOptions, ModelChoice, TrainedModel, TrainingSet};
use crate::preprocess::{pmm_impute_from, PmmOptions, Preprocessor, Protocol};
use crate::rng::SeedPath;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub panel: PanelOptions,
    pub features: FeatureConfig,
    pub train_seasons: Vec<i32>,
    pub test_seasons: Vec<i32>,
    pub pmm_donors: usize,
}

impl PipelineOptions {
    pub fn new(train_seasons: Vec<i32>, test_seasons: Vec<i32>) -> Self {
        PipelineOptions {
            panel: PanelOptions::default(),
            features: FeatureConfig::default(),
            train_seasons,
            test_seasons,
            pmm_donors: 5,
        }
    }
}

/// Which labels, if any, are shuffled before fitting or scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPermutation {
    #[default]
    None,
    Train,
    Test,
    /// Training and test labels, each shuffled within its own seasons.
    Both,
}

const SESSION_COLUMNS: [&str; 7] = ["duration_min", "is_match", "rpe", "distance_m", "msr_m", "hsr_m", "player_load"];

/// Fill missing session loads by predictive mean matching on duration and
/// session type, drawing donors only from sessions in `donor_seasons`.
pub fn impute_sessions(sessions: &[SessionRecord], donor_seasons: &[i32], seed: SeedPath) -> Result<Vec<SessionRecord>> {
    if sessions.iter().all(SessionRecord::is_complete) {
        return Ok(sessions.to_vec());
    }
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let m = Array2::from_shape_fn((sessions.len(), SESSION_COLUMNS.len()), |(i, j)| {
        let s = &sessions[i];
        match j {
            0 => s.duration_min,
            1 => f64::from(u8::from(s.session_type == SessionType::Match)),
            2 => opt(s.rpe.map(f64::from)),
            3 => opt(s.distance_m),
            4 => opt(s.msr_m),
            5 => opt(s.hsr_m),
            _ => opt(s.player_load),
        }
    });
    let donors: Vec<usize> = (0..sessions.len())
        .filter(|&i| donor_seasons.contains(&sessions[i].season))
        .collect();
    let reference = m.select(Axis(0), &donors);
    let opts = PmmOptions {
        column_names: Some(SESSION_COLUMNS.iter().map(|s| s.to_string()).collect()),
        ..PmmOptions::default()
    };
    let filled = pmm_impute_from(reference.view(), &m, &opts, &mut seed.rng())?;
    Ok(sessions
        .iter()
        .enumerate()
        .map(|(i, s)| SessionRecord {
            rpe: Some(filled[[i, 2]].round().clamp(0.0, 10.0) as u8),
            distance_m: Some(filled[[i, 3]]),
            msr_m: Some(filled[[i, 4]]),
            hsr_m: Some(filled[[i, 5]]),
            player_load: Some(filled[[i, 6]]),
            ..s.clone()
        })
        .collect())
}

/// Everything that does not depend on the run seed.
#[derive(Debug, Clone)]
pub struct DataContext {
    pub cohort: Cohort,
    pub panel: DailyPanel,
    pub split: SplitDataset,
    pub options: PipelineOptions,
    /// Athlete index of each panel row.
    pub groups: Vec<u32>,
    /// Day number of each panel row, for within-athlete ordering.
    pub order: Vec<i64>,
    complete_features: Option<FeatureMatrix>,
}

/// Imputed, untransformed feature matrices for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRun {
    pub names: Vec<String>,
    pub train_x: Array2<f64>,
    pub test_x: Array2<f64>,
}

/// Matrices after the train-fitted transform of a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRun {
    pub protocol: Protocol,
    pub preprocessor: Preprocessor,
    pub names: Vec<String>,
    pub train_x: Array2<f64>,
    pub test_x: Array2<f64>,
}

impl PreparedRun {
    pub fn transform(&self, protocol: Protocol) -> Result<TransformedRun> {
        let preprocessor = Preprocessor::fit(&self.train_x, protocol.pca)?;
        Ok(TransformedRun {
            protocol,
            names: preprocessor.output_names(&self.names),
            train_x: preprocessor.transform(&self.train_x),
            test_x: preprocessor.transform(&self.test_x),
            preprocessor,
        })
    }
}

impl DataContext {
    pub fn new(cohort: Cohort, options: PipelineOptions) -> Result<Self> {
        let panel = build_daily_panel(&cohort.sessions, &cohort.injuries, &cohort.athletes, options.panel)?;
        for w in &panel.warnings {
            log::warn!("{w}");
        }
        let split = split_by_season(&panel, &options.train_seasons, &options.test_seasons)?;
        if split.train.is_empty() || split.test.is_empty() {
            return Err(Error::InsufficientData(format!(
                "season split leaves {} training and {} test rows",
                split.train.len(),
                split.test.len()
            )));
        }
        let ids: BTreeMap<&str, u32> = cohort
            .athletes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.athlete_id.as_str(), i as u32))
            .collect();
        let groups = panel.rows.iter().map(|r| ids[r.athlete_id.as_str()]).collect();
        let order = panel
            .rows
            .iter()
            .map(|r| i64::from(chrono::Datelike::num_days_from_ce(&r.date)))
            .collect();
        let complete_features = if cohort.sessions.iter().all(SessionRecord::is_complete) {
            let series = build_load_series(&cohort.sessions, &panel.seasons)?;
            Some(build_feature_matrix(&panel, &series, &options.features)?)
        } else {
            None
        };
        Ok(DataContext {
            cohort,
            panel,
            split,
            options,
            groups,
            order,
            complete_features,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.options.features.columns().iter().map(|c| c.name()).collect()
    }

    pub fn train_labels(&self, key: OutcomeKey) -> Vec<u8> {
        self.split.train.iter().map(|&i| u8::from(self.panel.rows[i].labels.get(key))).collect()
    }

    pub fn test_labels(&self, key: OutcomeKey) -> Vec<u8> {
        self.split.test.iter().map(|&i| u8::from(self.panel.rows[i].labels.get(key))).collect()
    }

    /// Feature matrix for the whole panel with missing history left as NaN.
    pub fn raw_features(&self, seed: SeedPath) -> Result<FeatureMatrix> {
        if let Some(f) = &self.complete_features {
            return Ok(f.clone());
        }
        let sessions = impute_sessions(&self.cohort.sessions, &self.options.train_seasons, seed.child("sessions"))?;
        let series = build_load_series(&sessions, &self.panel.seasons)?;
        build_feature_matrix(&self.panel, &series, &self.options.features)
    }

    /// Impute everything for one run; donors and regressions use training
    /// rows only.
    pub fn prepare(&self, seed: SeedPath) -> Result<PreparedRun> {
        let seed = seed.child("impute");
        let features = self.raw_features(seed)?;
        let names = features.names();
        let train = features.values.select(Axis(0), &self.split.train);
        let test = features.values.select(Axis(0), &self.split.test);
        let opts = PmmOptions {
            donors: self.options.pmm_donors,
            column_names: Some(names.clone()),
            ..PmmOptions::default()
        };
        let train_x = pmm_impute_from(train.view(), &train, &opts, &mut seed.child("train").rng())?;
        let test_x = pmm_impute_from(train.view(), &test, &opts, &mut seed.child("test").rng())?;
        Ok(PreparedRun { names, train_x, test_x })
    }

    pub fn training_set(&self, x: Array2<f64>, y: Vec<u8>) -> Result<TrainingSet> {
        let groups = self.split.train.iter().map(|&i| self.groups[i]).collect();
        let order = self.split.train.iter().map(|&i| self.order[i]).collect();
        TrainingSet::with_groups(x, y, groups, order)
    }
}

/// A fitted cell: the model plus its scores on the held-out seasons.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub model: TrainedModel,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<u8>,
    pub test_auc: f64,
    /// Training-side scores for threshold selection: out-of-fold when the
    /// model was tuned, in-sample otherwise.
    pub train_scores: Vec<f64>,
    pub train_labels: Vec<u8>,
}

pub fn run_cell(
    ctx: &DataContext,
    run: &TransformedRun,
    model: &ModelChoice,
    outcome: OutcomeKey,
    cv: &CvOptions,
    permutation: LabelPermutation,
    seed: SeedPath,
) -> Result<CellResult> {
    let mut train_y = ctx.train_labels(outcome);
    let mut test_y = ctx.test_labels(outcome);
    match permutation {
        LabelPermutation::None => {}
        LabelPermutation::Train => train_y.shuffle(&mut seed.child("permute").rng()),
        LabelPermutation::Test => test_y.shuffle(&mut seed.child("permute").rng()),
        LabelPermutation::Both => {
            train_y.shuffle(&mut seed.child("permute").rng());
            test_y.shuffle(&mut seed.child("permute-test").rng());
        }
    }
    let spec = model.resolve(run.train_x.ncols());
    let ts = ctx.training_set(run.train_x.clone(), train_y.clone())?;
    let trained = fit_model(&spec, &ts, run.names.clone(), &cv.clone().with_sampling(run.protocol.sampling), seed.child("model"))?;
    let test_scores = trained.score(&run.test_x)?;
    let test_auc = auc(&test_scores, &test_y)?;
    let train_scores = match &trained.cv {
        Some(r) => r.oof_scores.clone(),
        None => trained.score(&run.train_x)?,
    };
    Ok(CellResult {
        model: trained,
        test_scores,
        test_labels: test_y,
        test_auc,
        train_scores,
        train_labels: train_y,
    })
}
