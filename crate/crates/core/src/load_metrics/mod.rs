//! Daily training-load features.
//!
//! Every feature for day `i` is computed from loads on days strictly before
//! `i`, so the load recorded on an injury day never feeds its own prediction.
//! Series are dense calendar-day arrays starting at the season's first
//! session; rest days carry zero load.

mod matrix;

pub use matrix::{
    build_feature_matrix, build_load_series, FeatureColumn, FeatureConfig, FeatureKind,
    FeatureMatrix, LoadSeriesSet,
};

use crate::domain::LoadVariable;
use crate::error::{Error, Result};

/// Smoothing factor for an exponentially weighted average with span `n`.
pub fn decay(span: usize) -> f64 {
    2.0 / (span as f64 + 1.0)
}

/// Mean of the `window` days before `day`. `None` when the season has not
/// yet accumulated `window` days of history.
pub fn rolling_average(loads: &[f64], day: usize, window: usize) -> Option<f64> {
    if window == 0 || day < window || day > loads.len() {
        return None;
    }
    Some(loads[day - window..day].iter().sum::<f64>() / window as f64)
}

/// `EWMA_i` for `i = 0..=loads.len()`, seeded with `EWMA_0 = 0`.
pub fn ewma_trace(loads: &[f64], span: usize) -> Vec<f64> {
    let lambda = decay(span);
    let mut out = Vec::with_capacity(loads.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &w in loads {
        acc = lambda * w + (1.0 - lambda) * acc;
        out.push(acc);
    }
    out
}

/// `EWMA_i = λ·w_{i-1} + (1-λ)·EWMA_{i-1}`, λ = 2/(N+1).
pub fn ewma(loads: &[f64], day: usize, span: usize) -> Option<f64> {
    if day == 0 || day > loads.len() {
        return None;
    }
    let lambda = decay(span);
    Some(
        loads[..day]
            .iter()
            .fold(0.0, |acc, &w| lambda * w + (1.0 - lambda) * acc),
    )
}

/// Handling of degenerate weeks in monotony.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonyRule {
    /// Value assigned when the week has positive load but no variation.
    pub cap: f64,
    /// Standard deviations below this count as zero.
    pub sd_floor: f64,
}

impl Default for MonotonyRule {
    fn default() -> Self {
        MonotonyRule {
            cap: 10.0,
            sd_floor: 1e-12,
        }
    }
}

pub const MONOTONY_WINDOW: usize = 7;

fn week(loads: &[f64], day: usize) -> Option<&[f64]> {
    if day < MONOTONY_WINDOW || day > loads.len() {
        return None;
    }
    Some(&loads[day - MONOTONY_WINDOW..day])
}

/// Weekly mean over the sample standard deviation of the previous 7 days.
pub fn monotony7(loads: &[f64], day: usize, rule: MonotonyRule) -> Option<f64> {
    let w = week(loads, day)?;
    let n = w.len() as f64;
    let sum: f64 = w.iter().sum();
    if sum == 0.0 {
        return Some(0.0);
    }
    let mean = sum / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd < rule.sd_floor || w.iter().all(|&x| x == w[0]) {
        Some(rule.cap)
    } else {
        Some(mean / sd)
    }
}

/// Weekly total multiplied by monotony.
pub fn strain7(loads: &[f64], day: usize, rule: MonotonyRule) -> Option<f64> {
    let total: f64 = week(loads, day)?.iter().sum();
    Some(total * monotony7(loads, day, rule)?)
}

/// Acute over chronic rolling mean; zero when there is no chronic load.
pub fn acwr(loads: &[f64], day: usize, acute: usize, chronic: usize) -> Option<f64> {
    let c = rolling_average(loads, day, chronic)?;
    let a = rolling_average(loads, day, acute)?;
    Some(if c == 0.0 { 0.0 } else { a / c })
}

/// Acute over chronic EWMA; zero when the chronic EWMA is zero.
pub fn ew_acwr(loads: &[f64], day: usize, acute_span: usize, chronic_span: usize) -> Option<f64> {
    let c = ewma(loads, day, chronic_span)?;
    let a = ewma(loads, day, acute_span)?;
    Some(if c == 0.0 { 0.0 } else { a / c })
}

/// One athlete's daily loads for one variable over one season.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub athlete_id: String,
    pub season: i32,
    pub variable: LoadVariable,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn rolling_average(&self, day: usize, window: usize) -> Option<f64> {
        rolling_average(&self.values, day, window)
    }

    pub fn ewma(&self, day: usize, span: usize) -> Option<f64> {
        ewma(&self.values, day, span)
    }

    pub fn acwr(&self, day: usize, acute: usize, chronic: usize) -> Option<f64> {
        acwr(&self.values, day, acute, chronic)
    }

    pub fn ew_acwr(&self, day: usize, acute: usize, chronic: usize) -> Option<f64> {
        ew_acwr(&self.values, day, acute, chronic)
    }

    pub fn monotony7(&self, day: usize, rule: MonotonyRule) -> Result<Option<f64>> {
        if !self.variable.has_monotony() {
            return Err(Error::UnsupportedVariable("monotony"));
        }
        Ok(monotony7(&self.values, day, rule))
    }

    pub fn strain7(&self, day: usize, rule: MonotonyRule) -> Result<Option<f64>> {
        if !self.variable.has_monotony() {
            return Err(Error::UnsupportedVariable("strain"));
        }
        Ok(strain7(&self.values, day, rule))
    }
}
