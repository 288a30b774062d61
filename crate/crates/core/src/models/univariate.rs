//! Single-predictor logistic regression fitted by Newton-Raphson (IRLS).

use crate::error::{Error, Result};
use crate::linalg::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateModel {
    pub column: usize,
    pub intercept: f64,
    pub slope: f64,
    /// False when the likelihood has no finite maximum (separated data);
    /// the last finite iterate is kept.
    pub converged: bool,
}

impl UnivariateModel {
    pub fn probability(&self, x: f64) -> f64 {
        sigmoid(self.intercept + self.slope * x)
    }
}

pub const UNIVARIATE_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

pub fn fit_univariate(x: &[f64], y: &[u8], column: usize) -> Result<UnivariateModel> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("row count mismatch".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::InsufficientData(
            "univariate logistic regression needs both classes".into(),
        ));
    }
    let rate = pos as f64 / y.len() as f64;
    let (mut b0, mut b1) = ((rate / (1.0 - rate)).ln(), 0.0);
    for _ in 0..MAX_NEWTON {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(b0 + b1 * xi);
            let r = f64::from(yi) - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det.abs() > 1e-300) || !det.is_finite() {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        if !d0.is_finite() || !d1.is_finite() {
            break;
        }
        b0 += d0;
        b1 += d1;
        if d0.abs().max(d1.abs()) < UNIVARIATE_TOL {
            return Ok(UnivariateModel {
                column,
                intercept: b0,
                slope: b1,
                converged: true,
            });
        }
    }
    log::warn!("univariate logistic regression on column {column} did not converge (separation?)");
    Ok(UnivariateModel {
        column,
        intercept: b0,
        slope: b1,
        converged: false,
    })
}
