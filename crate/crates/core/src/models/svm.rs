//! Soft-margin RBF support vector classifier trained by sequential minimal
//! optimization with second-order working-set selection.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub cost: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// KKT violation tolerance on the maximal violating pair.
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Kernel cache budget in bytes.
    pub cache_bytes: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            tol: 1e-3,
            max_iter: None,
            cache_bytes: 200 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    pub support: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, row: ArrayView1<f64>) -> f64 {
        self.support
            .rows()
            .into_iter()
            .zip(&self.dual_coef)
            .map(|(sv, &c)| c * rbf(sv, row, self.gamma))
            .sum::<f64>()
            - self.rho
    }
}

pub fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

/// Least-recently-used store of signed kernel rows `Q_i = y_i y_j K(x_i, x_j)`.
struct KernelCache<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    stamp: Vec<u64>,
    clock: u64,
    held: usize,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Array2<f64>, y: &'a [f64], gamma: f64, bytes: usize) -> Self {
        let n = y.len();
        let capacity = (bytes / (n.max(1) * 8)).max(2);
        KernelCache {
            x,
            y,
            gamma,
            rows: vec![None; n],
            stamp: vec![0; n],
            clock: 0,
            held: 0,
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        self.stamp[i] = self.clock;
        if self.rows[i].is_none() {
            if self.held >= self.capacity {
                let victim = (0..self.rows.len())
                    .filter(|&k| k != i && self.rows[k].is_some())
                    .min_by_key(|&k| self.stamp[k])
                    .expect("cache holds at least one other row");
                self.rows[victim] = None;
                self.held -= 1;
            }
            let xi = self.x.row(i);
            let yi = self.y[i];
            let computed = self
                .x
                .rows()
                .into_iter()
                .zip(self.y)
                .map(|(xj, &yj)| yi * yj * rbf(xi, xj, self.gamma))
                .collect();
            self.rows[i] = Some(computed);
            self.held += 1;
        }
        self.rows[i].as_deref().expect("row just filled")
    }
}

const TAU: f64 = 1e-12;

pub fn fit_svm(x: &Array2<f64>, labels: &[u8], params: SvmParams, opts: SvmOptions) -> Result<SvmModel> {
    let n = labels.len();
    if x.nrows() != n || n == 0 {
        return Err(Error::InvalidInput("svm needs matching, nonempty inputs".into()));
    }
    if !(params.cost > 0.0 && params.gamma > 0.0) {
        return Err(Error::Config(format!("svm needs C > 0 and gamma > 0, got {params:?}")));
    }
    let npos = labels.iter().filter(|&&v| v == 1).count();
    if npos == 0 || npos == n {
        return Err(Error::InsufficientData("svm needs both classes".into()));
    }
    let c = params.cost;
    let y: Vec<f64> = labels.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    // RBF diagonal is always 1.
    let qd = 1.0;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache = KernelCache::new(x, &y, params.gamma, opts.cache_bytes);
    let max_iter = opts.max_iter.unwrap_or_else(|| (100 * n).max(1_000_000));
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        let qi = cache.row(i).to_vec();
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (2.0 * qd - 2.0 * y[i] * y[t] * qi[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax - gmin < opts.tol {
            break;
        }
        let Some(j) = j_sel else { break };
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                model: "svm",
                iterations,
                max_change: gmax - gmin,
            });
        }
        iterations += 1;

        let qj = cache.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (2.0 * qd + 2.0 * qi[j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 * qd - 2.0 * qi[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += qi[k] * di + qj[k] * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let support = Array2::from_shape_fn((sv.len(), x.ncols()), |(r, k)| x[[sv[r], k]]);
    let dual_coef = sv.iter().map(|&t| alpha[t] * y[t]).collect();
    Ok(SvmModel {
        gamma: params.gamma,
        support,
        dual_coef,
        rho,
        iterations,
    })
}
