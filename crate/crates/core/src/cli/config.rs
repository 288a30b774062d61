//! The TOML run configuration shared by every subcommand.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::domain::{OutcomeKey, PanelOptions, DEFAULT_BURN_IN_DAYS, DEFAULT_LAG_DAYS};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_SIMULATIONS;
use crate::models::{CvOptions, ModelChoice, ModelFamily, DEFAULT_FOLDS};
use crate::pipeline::PipelineOptions;
use crate::preprocess::{Protocol, SamplingMethod};
use crate::synth::CohortConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: RawData,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    models: Vec<RawModel>,
    #[serde(default)]
    evaluate: RawEvaluate,
    #[serde(default)]
    learning_curve: RawLearning,
    #[serde(default)]
    synth: CohortConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    sessions: PathBuf,
    injuries: PathBuf,
    athletes: PathBuf,
    train_seasons: Vec<i32>,
    test_seasons: Vec<i32>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    seed: u64,
    n_sims: usize,
    output: PathBuf,
    outcomes: Vec<String>,
    protocols: Vec<String>,
    grouped_cv: bool,
    pmm_donors: usize,
    smote_k: usize,
    smote_over_pct: f64,
    burn_in_days: i64,
    lag_days: i64,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            seed: 1,
            n_sims: DEFAULT_SIMULATIONS,
            output: "out".into(),
            outcomes: OutcomeKey::all().iter().map(ToString::to_string).collect(),
            protocols: vec!["plain".into()],
            grouped_cv: false,
            pmm_donors: 5,
            smote_k: 5,
            smote_over_pct: 200.0,
            burn_in_days: DEFAULT_BURN_IN_DAYS,
            lag_days: DEFAULT_LAG_DAYS,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: String,
    folds: Option<usize>,
    lambdas: Option<Vec<f64>>,
    alphas: Option<Vec<f64>>,
    trees: Option<Vec<usize>>,
    mtry: Option<Vec<usize>>,
    min_leaf: Option<Vec<usize>>,
    costs: Option<Vec<f64>>,
    gammas: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEvaluate {
    cost_ratios: Vec<f64>,
    threshold_mode: String,
}

impl Default for RawEvaluate {
    fn default() -> Self {
        RawEvaluate {
            cost_ratios: vec![50.0, 100.0, 1000.0],
            threshold_mode: "test".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawLearning {
    sizes: Option<Vec<usize>>,
    repeats: usize,
    outcome: String,
    protocol: String,
    models: Option<Vec<String>>,
}

impl Default for RawLearning {
    fn default() -> Self {
        RawLearning {
            sizes: None,
            repeats: 20,
            outcome: "HS".into(),
            protocol: "plain".into(),
            models: None,
        }
    }
}

/// Where operating-point thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// The cost-optimal point of the test ROC curve.
    Test,
    /// The cost-optimal threshold on out-of-fold training scores, applied to
    /// the test rows.
    Train,
    Both,
}

impl FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(ThresholdMode::Test),
            "train" => Ok(ThresholdMode::Train),
            "both" => Ok(ThresholdMode::Both),
            _ => Err(Error::Config(format!("threshold_mode must be test, train or both, not '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningSettings {
    pub sizes: Option<Vec<usize>>,
    pub repeats: usize,
    pub outcome: OutcomeKey,
    pub protocol: Protocol,
    pub families: Vec<ModelFamily>,
}

/// A validated run configuration with paths resolved against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sessions: PathBuf,
    pub injuries: PathBuf,
    pub athletes: PathBuf,
    pub train_seasons: Vec<i32>,
    pub test_seasons: Vec<i32>,
    pub outcomes: Vec<OutcomeKey>,
    pub protocols: Vec<Protocol>,
    pub models: Vec<ModelChoice>,
    pub n_sims: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub cv: CvOptions,
    pub pmm_donors: usize,
    pub panel: PanelOptions,
    pub cost_ratios: Vec<f64>,
    pub threshold_mode: ThresholdMode,
    pub learning: LearningSettings,
    pub synth: CohortConfig,
    /// SHA-256 of the configuration text.
    pub config_hash: String,
}

fn parse_list<T: FromStr>(items: &[String], what: &str) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("unknown {what} '{s}'")))
        })
        .collect()
}

fn default_models() -> Vec<ModelChoice> {
    ModelFamily::ALL.into_iter().map(ModelChoice::new).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let models = if raw.models.is_empty() {
            default_models()
        } else {
            raw.models
                .into_iter()
                .map(|m| {
                    Ok(ModelChoice {
                        family: m.family.parse()?,
                        folds: m.folds.unwrap_or(DEFAULT_FOLDS),
                        lambdas: m.lambdas,
                        alphas: m.alphas,
                        trees: m.trees,
                        mtry: m.mtry,
                        min_leaf: m.min_leaf,
                        costs: m.costs,
                        gammas: m.gammas,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        };
        let learning_families = match raw.learning_curve.models {
            Some(names) => parse_list(&names, "model family")?,
            None => models.iter().map(|m| m.family).collect(),
        };
        let cfg = RunConfig {
            sessions: resolve(raw.data.sessions),
            injuries: resolve(raw.data.injuries),
            athletes: resolve(raw.data.athletes),
            train_seasons: raw.data.train_seasons,
            test_seasons: raw.data.test_seasons,
            outcomes: parse_list(&raw.run.outcomes, "outcome")?,
            protocols: parse_list(&raw.run.protocols, "preprocessing protocol")?,
            models,
            n_sims: raw.run.n_sims,
            seed: raw.run.seed,
            output: resolve(raw.run.output),
            cv: CvOptions {
                grouped: raw.run.grouped_cv,
                sampling: SamplingMethod::None,
                smote_k: raw.run.smote_k,
                smote_over_pct: raw.run.smote_over_pct,
            },
            pmm_donors: raw.run.pmm_donors,
            panel: PanelOptions {
                burn_in_days: raw.run.burn_in_days,
                lag_days: raw.run.lag_days,
            },
            cost_ratios: raw.evaluate.cost_ratios,
            threshold_mode: raw.evaluate.threshold_mode.parse()?,
            learning: LearningSettings {
                sizes: raw.learning_curve.sizes,
                repeats: raw.learning_curve.repeats,
                outcome: raw
                    .learning_curve
                    .outcome
                    .parse()
                    .map_err(|e: String| Error::Config(e))?,
                protocol: raw.learning_curve.protocol.parse()?,
                families: learning_families,
            },
            synth: raw.synth,
            config_hash: hex::encode(Sha256::digest(text.as_bytes())),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.train_seasons.is_empty() || self.test_seasons.is_empty() {
            return fail("train_seasons and test_seasons must be nonempty".into());
        }
        if let Some(s) = self.train_seasons.iter().find(|s| self.test_seasons.contains(s)) {
            return fail(format!("season {s} is in both the training and test sets"));
        }
        if self.n_sims == 0 {
            return fail("n_sims must be at least 1".into());
        }
        if self.outcomes.is_empty() || self.protocols.is_empty() || self.models.is_empty() {
            return fail("outcomes, protocols and models must be nonempty".into());
        }
        if self.cost_ratios.is_empty() || self.cost_ratios.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return fail("cost_ratios must be positive".into());
        }
        if self.pmm_donors == 0 || self.cv.smote_k == 0 || !(self.cv.smote_over_pct >= 0.0) {
            return fail("pmm_donors and smote_k must be positive, smote_over_pct non-negative".into());
        }
        if self.panel.burn_in_days < 0 || self.panel.lag_days < 0 {
            return fail("burn_in_days and lag_days must be non-negative".into());
        }
        for m in &self.models {
            if m.folds < 2 {
                return fail(format!("{}: folds must be at least 2", m.family));
            }
            // Grid values are checked against a generous column count; the
            // real width is only known after preprocessing.
            m.resolve(1000).validate(1000)?;
        }
        if self.learning.repeats == 0 {
            return fail("learning_curve.repeats must be at least 1".into());
        }
        if let Some(sizes) = &self.learning.sizes {
            if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return fail("learning_curve.sizes must be strictly increasing".into());
            }
        }
        self.synth.validate()
    }

    /// Fail before any computation if an input table is missing.
    pub fn check_inputs(&self) -> Result<()> {
        for p in [&self.sessions, &self.injuries, &self.athletes] {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            panel: self.panel,
            pmm_donors: self.pmm_donors,
            ..PipelineOptions::new(self.train_seasons.clone(), self.test_seasons.clone())
        }
    }
}
