//! One function per subcommand. Every command writes its CSVs into the
//! output directory through an [`OutputDir`], which also maintains the
//! manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{RunConfig, ThresholdMode};
use crate::domain::{
    parse_athletes, parse_injuries, parse_sessions, write_athletes, write_injuries, write_sessions, Cohort,
    OutcomeKey,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    default_sizes, describe_features, learning_curve, optimal_operating_point, point_at_threshold, roc_curve,
    run_simulations, subgroup_auc, GroupAuc, LearningCurvePlan, OperatingPoint, SimulationPlan,
};
use crate::models::{read_model_file, write_model_file, ModelChoice, ModelFile};
use crate::pipeline::{run_cell, CellResult, DataContext, LabelPermutation, PreparedRun};
use crate::preprocess::Protocol;
use crate::rng::SeedPath;
use crate::synth::{generate_cohort, null_cohort};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Values that can be overridden from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_sims: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n_sims {
            cfg.n_sims = n;
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        cfg.validate()
    }
}

/// Whether a command finished every unit of work it attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Complete,
    Partial,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory plus the manifest describing it. The manifest is
/// rewritten after every file so an interrupted run leaves a valid, partial
/// record.
pub struct OutputDir {
    dir: PathBuf,
    header: Vec<String>,
    outputs: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(cfg: &RunConfig, command: &str, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
        let mut header = vec![
            "loadwatch-manifest v1".to_string(),
            format!("version {}", env!("CARGO_PKG_VERSION")),
            format!("command {command}"),
            format!("config_sha256 {}", cfg.config_hash),
            format!("seed {}", cfg.seed),
            format!("n_sims {}", cfg.n_sims),
        ];
        for p in inputs {
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            header.push(format!("input {name} {}", sha256_file(p)?));
        }
        let out = OutputDir {
            dir: cfg.output.clone(),
            header,
            outputs: Vec::new(),
        };
        out.write_manifest("running")?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_manifest(&self, status: &str) -> Result<()> {
        let mut text = self.header.join("\n");
        text.push('\n');
        for (name, hash) in &self.outputs {
            text.push_str(&format!("output {name} {hash}\n"));
        }
        text.push_str(&format!("status {status}\n"));
        let tmp = self.dir.join(".manifest.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        let dest = self.dir.join(MANIFEST_NAME);
        std::fs::rename(&tmp, &dest).map_err(|e| Error::io(dest, e))
    }

    /// Create `name` (relative to the output directory), fill it and record
    /// its hash.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        fill(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        drop(w);
        self.outputs.push((name.to_string(), sha256_file(&path)?));
        self.write_manifest("running")
    }

    pub fn finish(self, completion: Completion) -> Result<Completion> {
        self.write_manifest(match completion {
            Completion::Complete => "complete",
            Completion::Partial => "partial",
        })?;
        Ok(completion)
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Inf" } else { "-Inf" }.into()
    } else {
        format!("{v}")
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn finish_csv<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("csv output", e))
}

pub fn load_cohort(cfg: &RunConfig) -> Result<Cohort> {
    cfg.check_inputs()?;
    Ok(Cohort {
        sessions: parse_sessions(&cfg.sessions)?,
        injuries: parse_injuries(&cfg.injuries)?,
        athletes: parse_athletes(&cfg.athletes)?,
    })
}

fn context(cfg: &RunConfig) -> Result<DataContext> {
    DataContext::new(load_cohort(cfg)?, cfg.pipeline_options())
}

fn inputs(cfg: &RunConfig) -> [&Path; 3] {
    [&cfg.sessions, &cfg.injuries, &cfg.athletes]
}

/// Seed shared by train, predict and evaluate so they see the same
/// imputation and fits.
fn run_seed(cfg: &RunConfig) -> SeedPath {
    SeedPath::new(cfg.seed).child("run")
}

fn cell_seed(base: SeedPath, model: &ModelChoice, outcome: OutcomeKey, protocol: Protocol) -> SeedPath {
    base.child(&format!("{}/{}/{}", model.family, outcome, protocol))
}

fn cell_stem(model: &ModelChoice, outcome: OutcomeKey, protocol: Protocol) -> String {
    format!("{}__{}__{}", model.family, outcome, protocol).replace('+', "_")
}

pub fn cmd_features(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "features", &inputs(cfg))?;
    let features = ctx.raw_features(run_seed(cfg).child("impute"))?;
    out.write("features.csv", |w| features.write_csv(w, &ctx.panel))?;
    out.finish(Completion::Complete)
}

pub fn cmd_synth(cfg: &RunConfig, null: bool) -> Result<Completion> {
    let synth = if null { null_cohort(&cfg.synth)? } else { generate_cohort(&cfg.synth)? };
    let targets = [&cfg.sessions, &cfg.injuries, &cfg.athletes];
    for path in targets {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let open = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    write_sessions(open(&cfg.sessions)?, &synth.cohort.sessions)?;
    write_injuries(open(&cfg.injuries)?, &synth.cohort.injuries)?;
    write_athletes(open(&cfg.athletes)?, &synth.cohort.athletes)?;
    let mut out = OutputDir::create(cfg, if null { "synth --null" } else { "synth" }, &inputs(cfg))?;
    out.write("synth_summary.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["athletes", "sessions", "injuries", "session_days", "injury_rate", "warnings"])?;
        c.write_record([
            synth.cohort.athletes.len().to_string(),
            synth.cohort.sessions.len().to_string(),
            synth.cohort.injuries.len().to_string(),
            synth.draws.len().to_string(),
            num(synth.injury_rate()),
            synth.warnings.join("; "),
        ])?;
        finish_csv(c)
    })?;
    out.finish(Completion::Complete)
}

struct CellJob<'a> {
    model: &'a ModelChoice,
    outcome: OutcomeKey,
    protocol: Protocol,
    protocol_index: usize,
}

fn jobs(cfg: &RunConfig) -> Vec<CellJob<'_>> {
    let mut v = Vec::new();
    for model in &cfg.models {
        for &outcome in &cfg.outcomes {
            for (protocol_index, &protocol) in cfg.protocols.iter().enumerate() {
                v.push(CellJob {
                    model,
                    outcome,
                    protocol,
                    protocol_index,
                });
            }
        }
    }
    v
}

/// Fit every configured cell once with the run seed.
fn fit_cells<'a>(
    cfg: &'a RunConfig,
    ctx: &DataContext,
    prepared: &PreparedRun,
) -> Result<Vec<(CellJob<'a>, Result<CellResult>)>> {
    let transformed: Vec<_> = cfg.protocols.iter().map(|&p| prepared.transform(p)).collect::<Result<_>>()?;
    let base = run_seed(cfg);
    let results: Vec<Result<CellResult>> = jobs(cfg)
        .par_iter()
        .map(|j| {
            run_cell(
                ctx,
                &transformed[j.protocol_index],
                j.model,
                j.outcome,
                &cfg.cv,
                LabelPermutation::None,
                cell_seed(base, j.model, j.outcome, j.protocol),
            )
        })
        .collect();
    Ok(jobs(cfg).into_iter().zip(results).collect())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "train", &inputs(cfg))?;
    let prepared = ctx.prepare(run_seed(cfg))?;
    let cells = fit_cells(cfg, &ctx, &prepared)?;
    let mut completion = Completion::Complete;
    let mut rows = Vec::new();
    for (job, res) in &cells {
        let stem = cell_stem(job.model, job.outcome, job.protocol);
        match res {
            Ok(cell) => {
                let file = ModelFile {
                    outcome: job.outcome,
                    protocol: job.protocol,
                    inputs: prepared.names.clone(),
                    preprocessor: prepared.transform(job.protocol)?.preprocessor,
                    model: cell.model.clone(),
                };
                let name = format!("models/{stem}.model");
                out.write(&name, |w| write_model_file(&file, w))?;
                let (cv_mean, cv_sd) = cell
                    .model
                    .cv
                    .as_ref()
                    .map_or((f64::NAN, f64::NAN), |r| (r.candidates[r.selected].mean_auc, r.candidates[r.selected].sd_auc));
                rows.push(vec![
                    job.model.family.to_string(),
                    job.outcome.to_string(),
                    job.protocol.to_string(),
                    cell.model.hyper.to_string(),
                    num(cv_mean),
                    num(cv_sd),
                    cell.train_labels.len().to_string(),
                    cell.train_labels.iter().filter(|&&l| l == 1).count().to_string(),
                    name,
                    String::new(),
                ]);
            }
            Err(e) => {
                completion = Completion::Partial;
                log::error!("{stem}: {e}");
                let mut row = vec![job.model.family.to_string(), job.outcome.to_string(), job.protocol.to_string()];
                row.extend(["", "NA", "NA", "", "", ""].map(String::from));
                row.push(e.to_string());
                rows.push(row);
            }
        }
    }
    out.write("train_summary.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record([
            "model", "outcome", "preprocessing", "selected", "cv_mean_auc", "cv_sd_auc", "n_train", "n_pos", "file",
            "error",
        ])?;
        for r in &rows {
            c.write_record(r)?;
        }
        finish_csv(c)
    })?;
    out.finish(completion)
}

pub fn cmd_predict(cfg: &RunConfig, model_path: &Path) -> Result<Completion> {
    let file = read_model_file(BufReader::new(File::open(model_path).map_err(|e| Error::io(model_path, e))?))?;
    let ctx = context(cfg)?;
    let mut all_inputs = inputs(cfg).to_vec();
    all_inputs.push(model_path);
    let mut out = OutputDir::create(cfg, "predict", &all_inputs)?;
    let prepared = ctx.prepare(run_seed(cfg))?;
    if prepared.names != file.inputs {
        return Err(Error::InvalidInput(
            "model file was trained on a different feature layout".into(),
        ));
    }
    let train_scores = file.score(&prepared.train_x)?;
    let test_scores = file.score(&prepared.test_x)?;
    out.write("predictions.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["athlete_id", "date", "season", "split", "score", &format!("label_{}", file.outcome)])?;
        for (split, rows, scores) in [("train", &ctx.split.train, &train_scores), ("test", &ctx.split.test, &test_scores)] {
            for (&i, s) in rows.iter().zip(scores.iter()) {
                let r = &ctx.panel.rows[i];
                c.write_record([
                    r.athlete_id.clone(),
                    r.date.to_string(),
                    r.season.to_string(),
                    split.to_string(),
                    num(*s),
                    u8::from(r.labels.get(file.outcome)).to_string(),
                ])?;
            }
        }
        finish_csv(c)
    })?;
    out.finish(Completion::Complete)
}

fn point_row(prefix: &[String], mode: &str, ratio: f64, p: &OperatingPoint) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        mode.to_string(),
        num(ratio),
        num(p.threshold),
        num(p.tpr),
        num(p.fpr),
        num(p.lr_positive),
        num(p.lr_negative),
        num(p.p_injury_given_positive),
        num(p.p_injury_given_negative),
        num(p.expected_cost),
    ]);
    row
}

fn group_row(prefix: &[String], group: &str, g: &GroupAuc) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        group.to_string(),
        g.n.to_string(),
        g.n_pos.to_string(),
        g.n_neg.to_string(),
        g.auc.map_or_else(|| "NA".into(), num),
        g.status.to_string(),
        g.warning.clone().unwrap_or_default(),
    ]);
    row
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "evaluate", &inputs(cfg))?;
    let prepared = ctx.prepare(run_seed(cfg))?;
    let cells = fit_cells(cfg, &ctx, &prepared)?;
    let new_player: Vec<bool> = ctx.split.test.iter().map(|&i| ctx.panel.rows[i].new_player).collect();
    let mut completion = Completion::Complete;
    let (mut summary, mut points, mut groups) = (Vec::new(), Vec::new(), Vec::new());
    for (job, res) in &cells {
        let prefix = vec![job.model.family.to_string(), job.outcome.to_string(), job.protocol.to_string()];
        let cell = match res {
            Ok(c) => c,
            Err(e) => {
                completion = Completion::Partial;
                let mut row = prefix.clone();
                row.extend(["NA".to_string(), String::new(), e.to_string()]);
                summary.push(row);
                continue;
            }
        };
        let mut row = prefix.clone();
        row.extend([num(cell.test_auc), cell.model.hyper.to_string(), String::new()]);
        summary.push(row);
        let curve = roc_curve(&cell.test_scores, &cell.test_labels)?;
        let stem = cell_stem(job.model, job.outcome, job.protocol);
        out.write(&format!("roc/{stem}.csv"), |w| {
            let mut c = csv_writer(w);
            c.write_record(["threshold", "fpr", "tpr"])?;
            for (t, f, tp) in curve.points() {
                c.write_record([num(t), num(f), num(tp)])?;
            }
            finish_csv(c)
        })?;
        let test_prev = curve.n_pos as f64 / (curve.n_pos + curve.n_neg) as f64;
        for &ratio in &cfg.cost_ratios {
            if matches!(cfg.threshold_mode, ThresholdMode::Test | ThresholdMode::Both) {
                let p = optimal_operating_point(&curve, ratio, test_prev)?;
                points.push(point_row(&prefix, "test", ratio, &p));
            }
            if matches!(cfg.threshold_mode, ThresholdMode::Train | ThresholdMode::Both) {
                let train_curve = roc_curve(&cell.train_scores, &cell.train_labels)?;
                let n_pos = cell.train_labels.iter().filter(|&&l| l == 1).count();
                let train_prev = n_pos as f64 / cell.train_labels.len() as f64;
                let chosen = optimal_operating_point(&train_curve, ratio, train_prev)?;
                let p = point_at_threshold(&cell.test_scores, &cell.test_labels, chosen.threshold, ratio, test_prev)?;
                points.push(point_row(&prefix, "train", ratio, &p));
            }
        }
        let sg = subgroup_auc(&cell.test_scores, &cell.test_labels, &new_player)?;
        groups.push(group_row(&prefix, "new", &sg.in_group));
        groups.push(group_row(&prefix, "returning", &sg.out_group));
        for g in [&sg.in_group, &sg.out_group] {
            if let Some(w) = &g.warning {
                log::warn!("{stem}: {w}");
            }
        }
    }
    out.write("evaluation_summary.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["model", "outcome", "preprocessing", "test_auc", "selected", "error"])?;
        for r in &summary {
            c.write_record(r)?;
        }
        finish_csv(c)
    })?;
    out.write("operating_points.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record([
            "model", "outcome", "preprocessing", "threshold_mode", "cost_ratio", "threshold", "tpr", "fpr", "lr_positive",
            "lr_negative", "p_injury_given_positive", "p_injury_given_negative", "expected_cost",
        ])?;
        for r in &points {
            c.write_record(r)?;
        }
        finish_csv(c)
    })?;
    out.write("subgroups.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["model", "outcome", "preprocessing", "group", "n", "n_pos", "n_neg", "auc", "status", "warning"])?;
        for r in &groups {
            c.write_record(r)?;
        }
        finish_csv(c)
    })?;
    out.finish(completion)
}

pub fn simulation_plan(cfg: &RunConfig, permutation: LabelPermutation) -> SimulationPlan {
    SimulationPlan {
        outcomes: cfg.outcomes.clone(),
        protocols: cfg.protocols.clone(),
        models: cfg.models.clone(),
        n_sims: cfg.n_sims,
        master_seed: cfg.seed,
        cv: cfg.cv.clone(),
        permutation,
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "simulate", &inputs(cfg))?;
    let summary = run_simulations(&ctx, &simulation_plan(cfg, LabelPermutation::None))?;
    out.write("simulation_summary.csv", |w| summary.write_summary(w))?;
    out.write("simulation_runs.csv", |w| summary.write_runs(w))?;
    out.write("status.csv", |w| summary.write_status(w))?;
    out.finish(if summary.is_complete() { Completion::Complete } else { Completion::Partial })
}

pub fn cmd_learning_curve(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "learning-curve", &inputs(cfg))?;
    let seed = SeedPath::new(cfg.seed).child("learning");
    let prepared = ctx.prepare(seed)?;
    let lc = &cfg.learning;
    let train = ctx.training_set(prepared.train_x.clone(), ctx.train_labels(lc.outcome))?;
    let test_y = ctx.test_labels(lc.outcome);
    let plan = LearningCurvePlan {
        sizes: lc.sizes.clone().unwrap_or_else(|| default_sizes(train.len())),
        repeats: lc.repeats,
    };
    let mut completion = Completion::Complete;
    let mut rows = Vec::new();
    for family in &lc.families {
        let model = cfg
            .models
            .iter()
            .find(|m| m.family == *family)
            .cloned()
            .unwrap_or_else(|| ModelChoice::new(*family));
        let points = learning_curve(
            &train,
            &prepared.names,
            &prepared.test_x,
            &test_y,
            &model,
            lc.protocol,
            &cfg.cv,
            &plan,
            seed.child(family.name()),
        )?;
        for p in points {
            if !p.failures.is_empty() {
                completion = Completion::Partial;
                log::warn!("{family} at size {}: {} failed repeats, first: {}", p.size, p.failures.len(), p.failures[0]);
            }
            rows.push(vec![
                family.to_string(),
                lc.outcome.to_string(),
                lc.protocol.to_string(),
                p.size.to_string(),
                p.train_auc.len().to_string(),
                num(p.train_mean()),
                num(p.train_sd()),
                num(p.test_mean()),
                num(p.test_sd()),
            ]);
        }
    }
    out.write("learning_curve.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record([
            "model", "outcome", "preprocessing", "size", "n_ok", "train_auc_mean", "train_auc_sd", "test_auc_mean",
            "test_auc_sd",
        ])?;
        for r in &rows {
            c.write_record(r)?;
        }
        finish_csv(c)
    })?;
    out.finish(completion)
}

pub fn cmd_describe(cfg: &RunConfig) -> Result<Completion> {
    let ctx = context(cfg)?;
    let mut out = OutputDir::create(cfg, "describe", &inputs(cfg))?;
    let features = ctx.raw_features(run_seed(cfg).child("impute"))?;
    let train = features.values.select(ndarray::Axis(0), &ctx.split.train);
    let test = features.values.select(ndarray::Axis(0), &ctx.split.test);
    let contrasts = describe_features(&features.names(), &train, &test)?;
    out.write("describe.csv", |w| {
        let mut c = csv_writer(w);
        c.write_record(["feature", "train_median", "test_median", "rank_biserial", "n_train", "n_test"])?;
        for f in &contrasts {
            c.write_record([
                f.name.clone(),
                num(f.train_median),
                num(f.test_median),
                num(f.rank_biserial),
                f.n_train.to_string(),
                f.n_test.to_string(),
            ])?;
        }
        finish_csv(c)
    })?;
    out.finish(Completion::Complete)
}
