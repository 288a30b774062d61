//! Elastic-net penalised logistic regression.
//!
//! Minimises `mean log-loss + λ·(α‖β‖₁ + (1-α)‖β‖²/2)` with an unpenalised
//! intercept, by iteratively reweighted least squares whose inner weighted
//! problem is solved by cyclic coordinate descent with soft-thresholding on
//! the weighted Gram matrix.

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{log1p_exp, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(p: usize) -> Self {
        LogisticModel {
            intercept: 0.0,
            coef: vec![0.0; p],
        }
    }

    pub fn linear(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear(row))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNetOptions {
    /// Stop when no parameter moves by more than this in an outer step.
    pub tol: f64,
    /// Cap on outer (reweighting) steps.
    pub max_iter: usize,
}

impl Default for ElasticNetOptions {
    fn default() -> Self {
        ElasticNetOptions {
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

fn linear_predictor(x: ArrayView2<f64>, m: &LogisticModel) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|r| m.intercept + r.iter().zip(&m.coef).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Mean negative log-likelihood.
pub fn mean_log_loss(x: ArrayView2<f64>, y: &[u8], m: &LogisticModel) -> f64 {
    let eta = linear_predictor(x, m);
    eta.iter()
        .zip(y)
        .map(|(&e, &l)| log1p_exp(e) - f64::from(l) * e)
        .sum::<f64>()
        / y.len() as f64
}

/// Gradient of [`mean_log_loss`] as (intercept, coefficients).
pub fn log_loss_gradient(x: ArrayView2<f64>, y: &[u8], m: &LogisticModel) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let eta = linear_predictor(x, m);
    let mut g0 = 0.0;
    let mut g = vec![0.0; m.coef.len()];
    for (i, row) in x.rows().into_iter().enumerate() {
        let r = sigmoid(eta[i]) - f64::from(y[i]);
        g0 += r;
        for (gj, xj) in g.iter_mut().zip(row.iter()) {
            *gj += r * xj;
        }
    }
    (g0 / n, g.into_iter().map(|v| v / n).collect())
}

pub fn penalty(m: &LogisticModel, lambda: f64, alpha: f64) -> f64 {
    let l1: f64 = m.coef.iter().map(|b| b.abs()).sum();
    let l2: f64 = m.coef.iter().map(|b| b * b).sum();
    lambda * (alpha * l1 + (1.0 - alpha) * l2 / 2.0)
}

pub fn objective(x: ArrayView2<f64>, y: &[u8], m: &LogisticModel, lambda: f64, alpha: f64) -> f64 {
    mean_log_loss(x, y, m) + penalty(m, lambda, alpha)
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn validate(x: ArrayView2<f64>, y: &[u8], lambda: f64, alpha: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidInput("row count mismatch".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::InsufficientData(
            "logistic regression needs both classes".into(),
        ));
    }
    if !(lambda >= 0.0) || !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "invalid penalty lambda={lambda} alpha={alpha}"
        )));
    }
    Ok(())
}

/// Minimise `½βᵀGβ − bᵀβ + Σ_{j≥1} (l1·|β_j| + l2·β_j²/2)` by cyclic
/// coordinate descent with covariance updates. Coordinate 0 is the
/// unpenalised intercept. Whenever the active set settles, the stationarity
/// equations restricted to it are solved exactly and accepted if the result
/// satisfies the full optimality conditions.
fn penalized_quadratic(g: &Array2<f64>, b: &[f64], l1: f64, l2: f64, beta: &mut [f64], tol: f64) {
    let q = b.len();
    if l1 == 0.0 && ridge_solve(g, b, l2, beta) {
        return;
    }
    let mut c: Vec<f64> = (0..q)
        .map(|j| b[j] - (0..q).map(|k| g[[j, k]] * beta[k]).sum::<f64>())
        .collect();
    let mut full_sweep = true;
    let mut last_active: Vec<bool> = beta.iter().map(|v| *v != 0.0).collect();
    for _ in 0..MAX_INNER_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..q {
            if !full_sweep && j > 0 && beta[j] == 0.0 {
                continue;
            }
            let curvature = g[[j, j]] + if j > 0 { l2 } else { 0.0 };
            if curvature <= 0.0 {
                continue;
            }
            let gj = c[j] + g[[j, j]] * beta[j];
            let new = if j == 0 { gj / curvature } else { soft_threshold(gj, l1) / curvature };
            let d = new - beta[j];
            if d != 0.0 {
                for k in 0..q {
                    c[k] -= d * g[[k, j]];
                }
                beta[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        if max_change < tol {
            if full_sweep {
                return;
            }
            full_sweep = true;
            continue;
        }
        full_sweep = false;
        let active: Vec<bool> = beta.iter().map(|v| *v != 0.0).collect();
        if active == last_active && exact_active_solve(g, b, l1, l2, beta) {
            return;
        }
        last_active = active;
    }
}

const MAX_INNER_SWEEPS: usize = 100_000;

/// Without an L1 term the minimiser solves `(G + l2·I')β = b` directly, where
/// `I'` skips the intercept.
fn ridge_solve(g: &Array2<f64>, b: &[f64], l2: f64, beta: &mut [f64]) -> bool {
    let q = b.len();
    let a = DMatrix::from_fn(q, q, |r, s| g[[r, s]] + if r == s && r > 0 { l2 } else { 0.0 });
    let Some(chol) = a.cholesky() else {
        return false;
    };
    let sol = chol.solve(&DVector::from_column_slice(b));
    if sol.iter().any(|v| !v.is_finite()) {
        return false;
    }
    beta.copy_from_slice(sol.as_slice());
    true
}

/// Solve the stationarity system on the current active set with the current
/// signs; keep the solution only if it is sign-consistent and no inactive
/// coordinate violates its subgradient bound.
fn exact_active_solve(g: &Array2<f64>, b: &[f64], l1: f64, l2: f64, beta: &mut [f64]) -> bool {
    let q = b.len();
    let active: Vec<usize> = (0..q).filter(|&j| j == 0 || beta[j] != 0.0).collect();
    let k = active.len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for (r, &j) in active.iter().enumerate() {
        for (s, &l) in active.iter().enumerate() {
            a[(r, s)] = g[[j, l]];
        }
        if j > 0 {
            a[(r, r)] += l2;
            rhs[r] = b[j] - l1 * beta[j].signum();
        } else {
            rhs[r] = b[j];
        }
    }
    let Some(chol) = a.cholesky() else {
        return false;
    };
    let sol = chol.solve(&rhs);
    for (r, &j) in active.iter().enumerate() {
        if j > 0 && (sol[r] == 0.0 || sol[r].signum() != beta[j].signum()) {
            return false;
        }
        if !sol[r].is_finite() {
            return false;
        }
    }
    let mut trial = vec![0.0; q];
    for (r, &j) in active.iter().enumerate() {
        trial[j] = sol[r];
    }
    for j in 1..q {
        if trial[j] == 0.0 {
            let grad = b[j] - active.iter().map(|&l| g[[j, l]] * trial[l]).sum::<f64>();
            if grad.abs() > l1 * (1.0 + 1e-9) + 1e-14 {
                return false;
            }
        }
    }
    beta.copy_from_slice(&trial);
    true
}

struct Solver<'a> {
    /// `[1, X]`.
    design: Array2<f64>,
    y: &'a [u8],
    opts: ElasticNetOptions,
    outer: usize,
}

impl<'a> Solver<'a> {
    fn new(x: ArrayView2<'a, f64>, y: &'a [u8], opts: ElasticNetOptions) -> Self {
        let mut design = Array2::ones((x.nrows(), x.ncols() + 1));
        design.slice_mut(s![.., 1..]).assign(&x);
        Solver {
            design,
            y,
            opts,
            outer: 0,
        }
    }

    fn params(m: &LogisticModel) -> Array1<f64> {
        std::iter::once(m.intercept).chain(m.coef.iter().copied()).collect()
    }

    fn model(beta: &[f64]) -> LogisticModel {
        LogisticModel {
            intercept: beta[0],
            coef: beta[1..].to_vec(),
        }
    }

    fn objective(&self, m: &LogisticModel, lambda: f64, alpha: f64) -> f64 {
        let eta = self.design.dot(&Self::params(m));
        let loss = eta
            .iter()
            .zip(self.y)
            .map(|(&e, &l)| log1p_exp(e) - f64::from(l) * e)
            .sum::<f64>()
            / self.y.len() as f64;
        loss + penalty(m, lambda, alpha)
    }

    /// Minimise the weighted quadratic approximation around `m`.
    fn inner(&mut self, m: &LogisticModel, lambda: f64, alpha: f64) -> LogisticModel {
        let n = self.y.len() as f64;
        let beta0 = Self::params(m);
        let eta = self.design.dot(&beta0);
        let mut scaled = self.design.clone();
        let mut wz = Array1::zeros(self.y.len());
        for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
            let pr = sigmoid(eta[i]);
            let w = (pr * (1.0 - pr)).max(1e-5);
            wz[i] = w * eta[i] + (f64::from(self.y[i]) - pr);
            row *= w.sqrt();
        }
        let g = scaled.t().dot(&scaled) / n;
        let b = self.design.t().dot(&wz) / n;
        let mut beta = beta0.to_vec();
        penalized_quadratic(
            &g,
            b.as_slice().expect("contiguous"),
            lambda * alpha,
            lambda * (1.0 - alpha),
            &mut beta,
            self.opts.tol * 1e-2,
        );
        Self::model(&beta)
    }

    fn fit(&mut self, start: &LogisticModel, lambda: f64, alpha: f64) -> Result<LogisticModel> {
        let mut current = start.clone();
        let mut f_current = self.objective(&current, lambda, alpha);
        loop {
            self.outer += 1;
            let proposal = self.inner(&current, lambda, alpha);
            // step-halving keeps the true objective from increasing
            let mut t = 1.0;
            let mut candidate = proposal.clone();
            let mut f_candidate = self.objective(&candidate, lambda, alpha);
            let mut halvings = 0;
            while f_candidate > f_current + 1e-12 * f_current.abs().max(1.0) && halvings < 30 {
                t /= 2.0;
                candidate = LogisticModel {
                    intercept: current.intercept + t * (proposal.intercept - current.intercept),
                    coef: current
                        .coef
                        .iter()
                        .zip(&proposal.coef)
                        .map(|(a, b)| a + t * (b - a))
                        .collect(),
                };
                f_candidate = self.objective(&candidate, lambda, alpha);
                halvings += 1;
            }
            let change = std::iter::once((candidate.intercept - current.intercept).abs())
                .chain(
                    candidate
                        .coef
                        .iter()
                        .zip(&current.coef)
                        .map(|(a, b)| (a - b).abs()),
                )
                .fold(0.0, f64::max);
            if !change.is_finite() || !f_candidate.is_finite() {
                return Err(Error::NonConvergence {
                    model: "elastic-net logistic regression",
                    iterations: self.outer,
                    max_change: change,
                });
            }
            current = candidate;
            f_current = f_candidate;
            if change < self.opts.tol {
                return Ok(current);
            }
            if self.outer >= self.opts.max_iter {
                return Err(Error::NonConvergence {
                    model: "elastic-net logistic regression",
                    iterations: self.outer,
                    max_change: change,
                });
            }
        }
    }
}

fn base_rate_start(y: &[u8], p: usize) -> LogisticModel {
    let rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
    LogisticModel {
        intercept: (rate / (1.0 - rate)).ln(),
        coef: vec![0.0; p],
    }
}

pub fn fit_elastic_net(
    x: &Array2<f64>,
    y: &[u8],
    lambda: f64,
    alpha: f64,
    opts: ElasticNetOptions,
) -> Result<LogisticModel> {
    validate(x.view(), y, lambda, alpha)?;
    let start = base_rate_start(y, x.ncols());
    Solver::new(x.view(), y, opts).fit(&start, lambda, alpha)
}

/// Fit a sequence of penalties for one mixing value, warm-starting each fit
/// from the previous one in decreasing-λ order. Results come back in the
/// order of `lambdas`.
pub fn fit_elastic_net_path(
    x: &Array2<f64>,
    y: &[u8],
    alpha: f64,
    lambdas: &[f64],
    opts: ElasticNetOptions,
) -> Vec<Result<LogisticModel>> {
    if let Err(e) = validate(x.view(), y, 0.0, alpha) {
        let msg = e.to_string();
        return lambdas
            .iter()
            .map(|_| Err(Error::InsufficientData(msg.clone())))
            .collect();
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<Result<LogisticModel>>> = (0..lambdas.len()).map(|_| None).collect();
    let mut warm = base_rate_start(y, x.ncols());
    for i in order {
        let lambda = lambdas[i];
        if !(lambda >= 0.0) {
            out[i] = Some(Err(Error::Config(format!("invalid lambda {lambda}"))));
            continue;
        }
        let mut solver = Solver::new(x.view(), y, opts);
        let res = solver.fit(&warm, lambda, alpha);
        if let Ok(m) = &res {
            warm = m.clone();
        }
        out[i] = Some(res);
    }
    out.into_iter().map(|r| r.expect("every lambda fitted")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auc;
    use crate::rng::SeedPath;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn noisy_fixture(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = SeedPath::new(seed).rng();
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let y = x
            .rows()
            .into_iter()
            .map(|r| {
                let eta = 0.8 * r[0] - 0.5 * r[1] + 0.2;
                u8::from(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        (x, y)
    }

    #[test]
    fn unpenalised_fit_is_stationary() {
        let (x, y) = noisy_fixture(300, 4, 1);
        let m = fit_elastic_net(&x, &y, 0.0, 1.0, ElasticNetOptions::default()).unwrap();
        let (g0, g) = log_loss_gradient(x.view(), &y, &m);
        assert!(g0.abs() < 1e-5);
        assert!(g.iter().all(|v| v.abs() < 1e-5), "{g:?}");
    }

    #[test]
    fn huge_lasso_penalty_zeroes_slopes() {
        let (x, y) = noisy_fixture(200, 5, 2);
        let m = fit_elastic_net(&x, &y, 1e6, 1.0, ElasticNetOptions::default()).unwrap();
        assert!(m.coef.iter().all(|&b| b == 0.0));
        let rate = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        assert!((sigmoid(m.intercept) - rate).abs() < 1e-7);
    }

    #[test]
    fn separable_data_at_small_penalty() {
        let mut rng = SeedPath::new(3).rng();
        let x = Array2::from_shape_fn((80, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
        let y: Vec<u8> = x.rows().into_iter().map(|r| u8::from(r[0] + r[1] > 0.0)).collect();
        let m = fit_elastic_net(&x, &y, 1e-3, 0.5, ElasticNetOptions::default()).unwrap();
        let scores: Vec<f64> = x.rows().into_iter().map(|r| m.linear(r.as_slice().unwrap())).collect();
        assert_eq!(auc(&scores, &y).unwrap(), 1.0);
    }

    #[test]
    fn path_matches_cold_fits_and_shrinks() {
        let (x, y) = noisy_fixture(250, 6, 4);
        let lambdas = [1e-3, 1e-2, 1e-1, 0.3];
        let path = fit_elastic_net_path(&x, &y, 1.0, &lambdas, ElasticNetOptions::default());
        let mut norms = Vec::new();
        for (l, res) in lambdas.iter().zip(&path) {
            let warm = res.as_ref().unwrap();
            let cold = fit_elastic_net(&x, &y, *l, 1.0, ElasticNetOptions::default()).unwrap();
            for (a, b) in warm.coef.iter().zip(&cold.coef) {
                assert!((a - b).abs() < 1e-5);
            }
            norms.push(warm.coef.iter().map(|b| b.abs()).sum::<f64>());
        }
        assert!(norms.windows(2).all(|w| w[0] >= w[1] - 1e-9), "{norms:?}");
    }

    #[test]
    fn single_class_and_bad_penalty_are_errors() {
        let (x, _) = noisy_fixture(10, 2, 5);
        assert!(fit_elastic_net(&x, &[1; 10], 0.1, 1.0, ElasticNetOptions::default()).is_err());
        let (x, y) = noisy_fixture(50, 2, 5);
        assert!(fit_elastic_net(&x, &y, -1.0, 1.0, ElasticNetOptions::default()).is_err());
        assert!(fit_elastic_net(&x, &y, 1.0, 1.5, ElasticNetOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_diagnostics() {
        let (x, y) = noisy_fixture(100, 3, 6);
        let opts = ElasticNetOptions {
            tol: 1e-7,
            max_iter: 1,
        };
        match fit_elastic_net(&x, &y, 0.0, 1.0, opts) {
            Err(Error::NonConvergence { iterations, .. }) => assert!(iterations >= 1),
            other => panic!("{other:?}"),
        }
    }
}
