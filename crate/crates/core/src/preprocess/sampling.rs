//! Random under-sampling and SMOTE.

use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplingMethod {
    None,
    Undersample,
    Smote,
}

impl SamplingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::None => "none",
            SamplingMethod::Undersample => "undersample",
            SamplingMethod::Smote => "smote",
        }
    }
}

impl FromStr for SamplingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(SamplingMethod::None),
            "undersample" => Ok(SamplingMethod::Undersample),
            "smote" => Ok(SamplingMethod::Smote),
            other => Err(format!("unknown sampling method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub method: SamplingMethod,
    pub smote_k: usize,
    /// Synthetic rows per minority row, in percent (200 = two each).
    pub smote_over_pct: f64,
    pub rng_seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            method: SamplingMethod::None,
            smote_k: 5,
            smote_over_pct: 200.0,
            rng_seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn apply(&self, x: &Array2<f64>, y: &[u8]) -> Result<Resampled> {
        if self.smote_k == 0 {
            return Err(Error::Config("smote_k must be at least 1".into()));
        }
        let mut rng = SeedPath::new(self.rng_seed).rng();
        match self.method {
            SamplingMethod::None => Ok(Resampled {
                x: x.clone(),
                y: y.to_vec(),
                origin: (0..y.len()).map(RowOrigin::Original).collect(),
            }),
            SamplingMethod::Undersample => undersample(x, y, &mut rng),
            SamplingMethod::Smote => smote(x, y, self.smote_k, self.smote_over_pct, &mut rng),
        }
    }
}

/// Where an output row came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowOrigin {
    Original(usize),
    /// `x[base] + gap * (x[neighbor] - x[base])`.
    Synthetic { base: usize, neighbor: usize, gap: f64 },
}

impl RowOrigin {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, RowOrigin::Synthetic { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub origin: Vec<RowOrigin>,
}

struct Classes {
    minority: Vec<usize>,
    majority: Vec<usize>,
    minority_label: u8,
}

fn classes(y: &[u8]) -> Result<Classes> {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 1).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientData(
            "resampling needs both classes present".into(),
        ));
    }
    Ok(if pos.len() <= neg.len() {
        Classes {
            minority: pos,
            majority: neg,
            minority_label: 1,
        }
    } else {
        Classes {
            minority: neg,
            majority: pos,
            minority_label: 0,
        }
    })
}

fn take_majority<R: Rng>(majority: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    if n >= majority.len() {
        return majority.to_vec();
    }
    let mut keep: Vec<usize> = sample(rng, majority.len(), n)
        .into_iter()
        .map(|i| majority[i])
        .collect();
    keep.sort_unstable();
    keep
}

fn gather(x: &Array2<f64>, y: &[u8], rows: &[usize]) -> Resampled {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (o, &r) in rows.iter().enumerate() {
        out.row_mut(o).assign(&x.row(r));
    }
    Resampled {
        x: out,
        y: rows.iter().map(|&r| y[r]).collect(),
        origin: rows.iter().map(|&r| RowOrigin::Original(r)).collect(),
    }
}

/// Drop majority rows uniformly at random until both classes are the same
/// size. Kept rows stay in input order.
pub fn undersample<R: Rng>(x: &Array2<f64>, y: &[u8], rng: &mut R) -> Result<Resampled> {
    let c = classes(y)?;
    let mut rows = c.minority.clone();
    rows.extend(take_majority(&c.majority, c.minority.len(), rng));
    rows.sort_unstable();
    Ok(gather(x, y, &rows))
}

fn dist2(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Synthesize `over_pct`% new minority rows by interpolating towards one of
/// each row's `k` nearest minority neighbours, then under-sample the
/// majority to the enlarged minority size. Synthetic rows are appended after
/// the original rows.
pub fn smote<R: Rng>(
    x: &Array2<f64>,
    y: &[u8],
    k: usize,
    over_pct: f64,
    rng: &mut R,
) -> Result<Resampled> {
    let c = classes(y)?;
    let m = c.minority.len();
    if m < 2 {
        return Err(Error::InsufficientData(
            "SMOTE needs at least two minority rows".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Config("smote_k must be at least 1".into()));
    }
    if !(over_pct >= 0.0) {
        return Err(Error::Config("SMOTE percentage must be non-negative".into()));
    }
    let k = k.min(m - 1);
    let neighbours: Vec<Vec<usize>> = c
        .minority
        .iter()
        .map(|&a| {
            let mut d: Vec<(f64, usize)> = c
                .minority
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| (dist2(x.row(a), x.row(b)), b))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.into_iter().take(k).map(|(_, b)| b).collect()
        })
        .collect();

    let n_synth = (m as f64 * over_pct / 100.0).round() as usize;
    let mut per_row = vec![n_synth / m; m];
    for i in sample(rng, m, n_synth % m) {
        per_row[i] += 1;
    }

    let mut origins = Vec::with_capacity(n_synth);
    for (slot, &base) in c.minority.iter().enumerate() {
        for _ in 0..per_row[slot] {
            let neighbor = neighbours[slot][rng.random_range(0..k)];
            let gap: f64 = rng.random();
            origins.push(RowOrigin::Synthetic {
                base,
                neighbor,
                gap,
            });
        }
    }

    let mut rows = c.minority.clone();
    rows.extend(take_majority(&c.majority, m + n_synth, rng));
    rows.sort_unstable();
    let mut out = gather(x, y, &rows);

    let p = x.ncols();
    let mut synth = Array2::zeros((origins.len(), p));
    for (o, origin) in origins.iter().enumerate() {
        if let RowOrigin::Synthetic { base, neighbor, gap } = *origin {
            for j in 0..p {
                synth[[o, j]] = x[[base, j]] + gap * (x[[neighbor, j]] - x[[base, j]]);
            }
        }
    }
    out.x = ndarray::concatenate(ndarray::Axis(0), &[out.x.view(), synth.view()])
        .expect("same column count");
    out.y.extend(std::iter::repeat_n(c.minority_label, origins.len()));
    out.origin.extend(origins);
    Ok(out)
}
