use ndarray::Array2;

use crate::error::{Error, Result};

/// Column means and sample standard deviations from a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Zero-variance columns get scale 1.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &Array2<f64>) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "standardization needs a complete, finite training matrix".into(),
            ));
        }
        let n = m.nrows() as f64;
        let mut means = Vec::with_capacity(m.ncols());
        let mut scales = Vec::with_capacity(m.ncols());
        for col in m.columns() {
            let mean = col.sum() / n;
            let sd = if m.nrows() > 1 {
                (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            means.push(mean);
            scales.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Ok(Standardizer { means, scales })
    }

    pub fn apply(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| (x - self.means[j]) / self.scales[j]);
        }
        out
    }

    pub fn invert(&self, m: &Array2<f64>) -> Array2<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| x * self.scales[j] + self.means[j]);
        }
        out
    }
}

pub fn standardize(m: &Array2<f64>) -> Result<(Array2<f64>, Standardizer)> {
    let s = Standardizer::fit(m)?;
    Ok((s.apply(m), s))
}

pub fn apply_standardize(m: &Array2<f64>, s: &Standardizer) -> Array2<f64> {
    s.apply(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unit_column() {
        let (z, s) = standardize(&array![[1.0], [2.0], [3.0]]).unwrap();
        assert_eq!(z, array![[-1.0], [0.0], [1.0]]);
        assert_eq!(s.scales, vec![1.0]);
    }

    #[test]
    fn constant_column() {
        let (z, s) = standardize(&array![[5.0, 1.0], [5.0, 2.0]]).unwrap();
        assert_eq!(z.column(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(s.scales[0], 1.0);
    }

    #[test]
    fn round_trip_and_test_uses_training_parameters() {
        let train = array![[1.0, 10.0], [4.0, 30.0], [7.0, 20.0]];
        let (_, s) = standardize(&train).unwrap();
        let test = array![[100.0, -3.0], [2.5, 0.5]];
        let back = s.invert(&apply_standardize(&test, &s));
        for (a, b) in back.iter().zip(test.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let again = Standardizer::fit(&train).unwrap();
        assert_eq!(again, s);
        assert!(Standardizer::fit(&array![[f64::NAN]]).is_err());
    }
}
