//! Repeated end-to-end runs: every simulation redraws imputation, sampling,
//! fold assignment and model randomness from its own seed.

use std::io::Write;

use rayon::prelude::*;

use crate::domain::OutcomeKey;
use crate::error::{Error, Result};
use crate::models::{CvOptions, ModelChoice, ModelFamily};
use crate::pipeline::{run_cell, DataContext, LabelPermutation};
use crate::preprocess::Protocol;
use crate::rng::SeedPath;

pub const DEFAULT_SIMULATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub outcomes: Vec<OutcomeKey>,
    pub protocols: Vec<Protocol>,
    pub models: Vec<ModelChoice>,
    pub n_sims: usize,
    pub master_seed: u64,
    pub cv: CvOptions,
    pub permutation: LabelPermutation,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(Error::Config("at least one simulation is required".into()));
        }
        if self.outcomes.is_empty() || self.protocols.is_empty() || self.models.is_empty() {
            return Err(Error::Config("outcome, protocol and model lists must be nonempty".into()));
        }
        Ok(())
    }

    /// Cells in reporting order: model, then outcome, then protocol.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for m in &self.models {
            for &outcome in &self.outcomes {
                for &protocol in &self.protocols {
                    cells.push(CellKey {
                        family: m.family,
                        outcome,
                        protocol,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub family: ModelFamily,
    pub outcome: OutcomeKey,
    pub protocol: Protocol,
}

/// Outcome of one simulation in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub sim: usize,
    pub auc: Option<f64>,
    pub selected: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    pub records: Vec<SimRecord>,
}

impl CellSummary {
    pub fn aucs(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.auc).collect()
    }

    pub fn n_ok(&self) -> usize {
        self.records.iter().filter(|r| r.auc.is_some()).count()
    }

    pub fn complete(&self) -> bool {
        self.n_ok() == self.records.len()
    }

    /// Mean test AUC over successful simulations; NaN if none succeeded.
    pub fn mean(&self) -> f64 {
        let a = self.aucs();
        a.iter().sum::<f64>() / a.len() as f64
    }

    /// Sample standard deviation, reported as 0 for a single run.
    pub fn sd(&self) -> f64 {
        let a = self.aucs();
        match a.len() {
            0 => f64::NAN,
            1 => 0.0,
            n => {
                let m = self.mean();
                (a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        }
    }

    pub fn single_run(&self) -> bool {
        self.n_ok() == 1
    }

    pub fn status(&self) -> &'static str {
        if self.complete() {
            "complete"
        } else if self.n_ok() == 0 {
            "failed"
        } else {
            "incomplete"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub n_sims: usize,
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

impl SimulationSummary {
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(CellSummary::complete)
    }

    pub fn cell(&self, key: &CellKey) -> Option<&CellSummary> {
        self.cells.iter().find(|c| &c.key == key)
    }

    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "outcome", "preprocessing", "mean_auc", "sd_auc", "n_sims", "n_ok", "single_run"])?;
        for c in &self.cells {
            out.write_record([
                c.key.family.name().to_string(),
                c.key.outcome.to_string(),
                c.key.protocol.to_string(),
                fmt_num(c.mean()),
                fmt_num(c.sd()),
                self.n_sims.to_string(),
                c.n_ok().to_string(),
                c.single_run().to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("summary", e))
    }

    /// One row per simulation and cell.
    pub fn write_runs<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "outcome", "preprocessing", "sim", "auc", "selected", "error"])?;
        for c in &self.cells {
            for r in &c.records {
                out.write_record([
                    c.key.family.name().to_string(),
                    c.key.outcome.to_string(),
                    c.key.protocol.to_string(),
                    r.sim.to_string(),
                    r.auc.map_or_else(|| "NA".into(), fmt_num),
                    r.selected.clone().unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        out.flush().map_err(|e| Error::io("runs", e))
    }

    pub fn write_status<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "outcome", "preprocessing", "status", "n_ok", "n_failed", "first_error"])?;
        for c in &self.cells {
            let first = c.records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
            out.write_record([
                c.key.family.name().to_string(),
                c.key.outcome.to_string(),
                c.key.protocol.to_string(),
                c.status().to_string(),
                c.n_ok().to_string(),
                (c.records.len() - c.n_ok()).to_string(),
                first,
            ])?;
        }
        out.flush().map_err(|e| Error::io("status", e))
    }
}

pub fn simulation_seed(master_seed: u64, sim: usize) -> SeedPath {
    SeedPath::new(master_seed).child("sim").index(sim as u64)
}

fn run_one(ctx: &DataContext, plan: &SimulationPlan, sim: usize) -> Vec<SimRecord> {
    let seed = simulation_seed(plan.master_seed, sim);
    let failed = |e: &Error| SimRecord {
        sim,
        auc: None,
        selected: None,
        error: Some(e.to_string()),
    };
    let n_cells = plan.models.len() * plan.outcomes.len() * plan.protocols.len();
    let prepared = match ctx.prepare(seed) {
        Ok(p) => p,
        Err(e) => return vec![failed(&e); n_cells],
    };
    let transformed: Vec<_> = plan.protocols.iter().map(|&p| prepared.transform(p)).collect();
    let mut records = Vec::with_capacity(n_cells);
    for model in &plan.models {
        for &outcome in &plan.outcomes {
            for (protocol, run) in plan.protocols.iter().zip(&transformed) {
                let run = match run {
                    Ok(r) => r,
                    Err(e) => {
                        records.push(failed(e));
                        continue;
                    }
                };
                let cell_seed = seed.child(&format!("{}/{}/{}", model.family, outcome, protocol));
                match run_cell(ctx, run, model, outcome, &plan.cv, plan.permutation, cell_seed) {
                    Ok(cell) => records.push(SimRecord {
                        sim,
                        auc: Some(cell.test_auc),
                        selected: Some(cell.model.hyper.to_string()),
                        error: None,
                    }),
                    Err(e) => {
                        log::warn!("simulation {sim}, {} {outcome} {protocol}: {e}", model.family);
                        records.push(failed(&e));
                    }
                }
            }
        }
    }
    records
}

/// Run `plan.n_sims` independent simulations. Failures are recorded per cell
/// rather than aborting the batch; results do not depend on scheduling.
pub fn run_simulations(ctx: &DataContext, plan: &SimulationPlan) -> Result<SimulationSummary> {
    plan.validate()?;
    let per_sim: Vec<Vec<SimRecord>> = (0..plan.n_sims).into_par_iter().map(|s| run_one(ctx, plan, s)).collect();
    let cells = plan
        .cells()
        .into_iter()
        .enumerate()
        .map(|(i, key)| CellSummary {
            key,
            records: per_sim.iter().map(|recs| recs[i].clone()).collect(),
        })
        .collect();
    Ok(SimulationSummary {
        n_sims: plan.n_sims,
        master_seed: plan.master_seed,
        cells,
    })
}
