use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use super::scale::Standardizer;
use crate::error::{Error, Result};

pub const DEFAULT_PCA_THRESHOLD: f64 = 0.95;

/// Correlation-matrix principal components, truncated at a cumulative
/// explained-variance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// p × k, orthonormal columns.
    pub loadings: Array2<f64>,
    pub n_components: usize,
    /// Fraction of variance for every component, descending.
    pub explained: Vec<f64>,
}

impl PcaProjection {
    pub fn cumulative_explained(&self) -> f64 {
        self.explained[..self.n_components].iter().sum()
    }

    /// Map scores back to the input space.
    pub fn reconstruct(&self, scores: &Array2<f64>) -> Array2<f64> {
        let z = scores.dot(&self.loadings.t());
        Standardizer {
            means: self.means.clone(),
            scales: self.scales.clone(),
        }
        .invert(&z)
    }
}

pub fn pca_fit(m: &Array2<f64>, threshold: f64) -> Result<PcaProjection> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!(
            "PCA threshold {threshold} outside (0, 1]"
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("PCA input has non-finite entries".into()));
    }
    if m.nrows() < 2 {
        return Err(Error::InsufficientData("PCA needs at least two rows".into()));
    }
    let scaler = Standardizer::fit(m)?;
    let z = scaler.apply(m);
    let p = z.ncols();
    let cov = z.t().dot(&z) / (z.nrows() as f64 - 1.0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |i, j| cov[[i, j]]));

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::InsufficientData("PCA input has no variance".into()));
    }
    let explained: Vec<f64> = values.iter().map(|v| v / total).collect();
    let mut cumulative = 0.0;
    let mut k = p;
    for (i, f) in explained.iter().enumerate() {
        cumulative += f;
        if cumulative >= threshold - 1e-10 {
            k = i + 1;
            break;
        }
    }

    let mut loadings = Array2::zeros((p, k));
    for (c, &src) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(src);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            loadings[[r, c]] = sign * v[r];
        }
    }
    Ok(PcaProjection {
        means: scaler.means,
        scales: scaler.scales,
        loadings,
        n_components: k,
        explained,
    })
}

pub fn pca_transform(m: &Array2<f64>, projection: &PcaProjection) -> Array2<f64> {
    let z = Standardizer {
        means: projection.means.clone(),
        scales: projection.scales.clone(),
    }
    .apply(m);
    z.dot(&projection.loadings)
}
