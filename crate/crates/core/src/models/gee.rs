//! Logistic GEE with an AR(1) working correlation.
//!
//! Rows are grouped into clusters (athletes) and ordered in time within each
//! cluster. The AR(1) correlation matrix has a tridiagonal inverse, so each
//! Fisher-scoring step costs O(n·p²) regardless of cluster size.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use super::logistic::{fit_elastic_net, ElasticNetOptions};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, solve_symmetric};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeeOptions {
    /// Hold the working correlation at this value instead of estimating it.
    pub fixed_alpha: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GeeOptions {
    fn default() -> Self {
        GeeOptions {
            fixed_alpha: None,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Working lag-1 correlation.
    pub alpha: f64,
    /// Dispersion estimate.
    pub phi: f64,
    pub iterations: usize,
}

impl GeeModel {
    /// Marginal (population-averaged) probability.
    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>())
    }
}

const ALPHA_BOUND: f64 = 0.95;
/// Largest coefficient change per scoring step.
const MAX_STEP: f64 = 1.0;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// `R(ρ)⁻¹ u` for an AR(1) correlation matrix of size `u.len()`.
fn ar1_inverse_apply(u: &[f64], rho: f64, out: &mut [f64]) {
    let m = u.len();
    if m == 1 || rho == 0.0 {
        out.copy_from_slice(u);
        return;
    }
    let s = 1.0 / (1.0 - rho * rho);
    for t in 0..m {
        let diag = if t == 0 || t == m - 1 { 1.0 } else { 1.0 + rho * rho };
        let mut v = diag * u[t];
        if t > 0 {
            v -= rho * u[t - 1];
        }
        if t + 1 < m {
            v -= rho * u[t + 1];
        }
        out[t] = s * v;
    }
}

pub fn fit_gee_ar1(
    x: &Array2<f64>,
    y: &[u8],
    groups: &[u32],
    order: &[i64],
    opts: GeeOptions,
) -> Result<GeeModel> {
    let n = y.len();
    if x.nrows() != n || groups.len() != n || order.len() != n {
        return Err(Error::InvalidInput("GEE inputs have mismatched lengths".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::InsufficientData("GEE needs both classes".into()));
    }
    let q = x.ncols() + 1;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (groups[i], order[i]));
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || groups[idx[k]] != groups[idx[start]] {
            clusters.push((start, k));
            start = k;
        }
    }
    let design = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let n_pairs: usize = clusters.iter().map(|(a, b)| b - a - 1).sum();

    // Start from the working-independence solution, which is the ordinary
    // logistic fit; fall back to the intercept-only model.
    let mut beta = match fit_elastic_net(x, y, 0.0, 0.0, ElasticNetOptions::default()) {
        Ok(m) => std::iter::once(m.intercept).chain(m.coef).collect(),
        Err(_) => {
            let rate = pos as f64 / n as f64;
            let mut b = vec![0.0; q];
            b[0] = (rate / (1.0 - rate)).ln();
            b
        }
    };
    let mut alpha = opts.fixed_alpha.unwrap_or(0.0);
    let mut phi = 1.0;
    let mut damping = 1.0f64;
    let mut previous_change = f64::INFINITY;

    let mut mu = vec![0.0; n];
    let mut sd = vec![0.0; n];
    let mut e = vec![0.0; n];
    for it in 1..=opts.max_iter {
        for k in 0..n {
            let i = idx[k];
            let eta = (0..q).map(|j| design(i, j) * beta[j]).sum::<f64>();
            mu[k] = sigmoid(eta);
            sd[k] = (mu[k] * (1.0 - mu[k])).max(1e-10).sqrt();
            e[k] = (f64::from(y[i]) - mu[k]) / sd[k];
        }
        if opts.fixed_alpha.is_none() {
            let dof = (n as f64 - q as f64).max(1.0);
            phi = e.iter().map(|v| v * v).sum::<f64>() / dof;
            alpha = if n_pairs > q && phi > 0.0 {
                let lag: f64 = clusters
                    .iter()
                    .flat_map(|&(a, b)| (a..b.saturating_sub(1)).map(|t| e[t] * e[t + 1]))
                    .sum();
                (lag / (n_pairs - q) as f64 / phi).clamp(-ALPHA_BOUND, ALPHA_BOUND)
            } else {
                0.0
            };
        }

        let mut h = DMatrix::<f64>::zeros(q, q);
        let mut g = DVector::<f64>::zeros(q);
        let mut a_col = Vec::new();
        let mut b_cols: Vec<Vec<f64>> = vec![Vec::new(); q];
        let mut e_inv = Vec::new();
        for &(a, b) in &clusters {
            let m = b - a;
            e_inv.resize(m, 0.0);
            ar1_inverse_apply(&e[a..b], alpha, &mut e_inv);
            for (j, bcol) in b_cols.iter_mut().enumerate() {
                a_col.clear();
                a_col.extend((a..b).map(|k| sd[k] * design(idx[k], j)));
                bcol.resize(m, 0.0);
                ar1_inverse_apply(&a_col, alpha, bcol);
            }
            for j in 0..q {
                let mut gj = 0.0;
                for t in 0..m {
                    gj += sd[a + t] * design(idx[a + t], j) * e_inv[t];
                }
                g[j] += gj;
                for l in j..q {
                    let mut hjl = 0.0;
                    for t in 0..m {
                        hjl += sd[a + t] * design(idx[a + t], j) * b_cols[l][t];
                    }
                    h[(j, l)] += hjl;
                    if l != j {
                        h[(l, j)] += hjl;
                    }
                }
            }
        }
        let mut step = solve_symmetric(h, &g)?;
        let max_change = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Shrink the step while the scoring steps stop getting smaller, which
        // breaks the two-cycles that the alternating α update can fall into.
        damping = if max_change >= previous_change {
            (damping * 0.5).max(MIN_DAMPING)
        } else {
            (damping * 1.5).min(1.0)
        };
        previous_change = max_change;
        step *= damping.min(MAX_STEP / max_change);
        if !max_change.is_finite() {
            return Err(Error::NonConvergence {
                model: "GEE",
                iterations: it,
                max_change,
            });
        }
        for j in 0..q {
            beta[j] += step[j];
        }
        if max_change < opts.tol {
            return Ok(GeeModel {
                intercept: beta[0],
                coef: beta[1..].to_vec(),
                alpha,
                phi,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            return Err(Error::NonConvergence {
                model: "GEE",
                iterations: it,
                max_change,
            });
        }
    }
    unreachable!("loop returns on the last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedPath;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dense_inverse(m: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |i, j| rho.powi((i as i32 - j as i32).abs()))
            .try_inverse()
            .unwrap()
    }

    #[test]
    fn tridiagonal_inverse_matches_dense() {
        let u = [0.3, -1.2, 2.0, 0.7, -0.4];
        let dense = dense_inverse(5, 0.6) * DVector::from_row_slice(&u);
        let mut out = [0.0; 5];
        ar1_inverse_apply(&u, 0.6, &mut out);
        for (a, b) in out.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn panel(seed: u64, clusters: usize, len: usize) -> (Array2<f64>, Vec<u8>, Vec<u32>, Vec<i64>) {
        let mut rng = SeedPath::new(seed).rng();
        let n = clusters * len;
        let x = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
        let y = (0..n)
            .map(|i| u8::from(rng.random::<f64>() < sigmoid(-0.3 + 0.7 * x[[i, 0]])))
            .collect();
        let groups = (0..n).map(|i| (i / len) as u32).collect();
        let order = (0..n).map(|i| (i % len) as i64).collect();
        (x, y, groups, order)
    }

    #[test]
    fn singleton_clusters_reduce_to_logistic_regression() {
        let (x, y, _, _) = panel(1, 1, 300);
        let groups: Vec<u32> = (0..300).collect();
        let order = vec![0; 300];
        let gee = fit_gee_ar1(&x, &y, &groups, &order, GeeOptions::default()).unwrap();
        assert_eq!(gee.alpha, 0.0);
        let lr = crate::models::logistic::fit_elastic_net(
            &x,
            &y,
            0.0,
            1.0,
            crate::models::logistic::ElasticNetOptions::default(),
        )
        .unwrap();
        assert!((gee.intercept - lr.intercept).abs() < 1e-6);
        for (a, b) in gee.coef.iter().zip(&lr.coef) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn length_mismatch_and_single_class() {
        let (x, y, g, o) = panel(2, 3, 10);
        assert!(fit_gee_ar1(&x, &y[..5], &g, &o, GeeOptions::default()).is_err());
        assert!(fit_gee_ar1(&x, &vec![0; 30], &g, &o, GeeOptions::default()).is_err());
    }
}
