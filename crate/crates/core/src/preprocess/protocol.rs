use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use super::pca::{pca_fit, pca_transform, PcaProjection, DEFAULT_PCA_THRESHOLD};
use super::sampling::SamplingMethod;
use super::scale::Standardizer;
use crate::error::{Error, Result};

/// Feature transform plus class-imbalance treatment, e.g. `plain`,
/// `plain+smote`, `pca+undersample`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Protocol {
    pub pca: bool,
    pub sampling: SamplingMethod,
}

impl Protocol {
    pub const PLAIN: Protocol = Protocol {
        pca: false,
        sampling: SamplingMethod::None,
    };
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.pca { "pca" } else { "plain" })?;
        if self.sampling != SamplingMethod::None {
            write!(f, "+{}", self.sampling.name())?;
        }
        Ok(())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown preprocessing protocol '{s}'"));
        let (head, tail) = s.split_once('+').unwrap_or((s, "none"));
        let pca = match head {
            "plain" => false,
            "pca" => true,
            _ => return Err(bad()),
        };
        let sampling = tail.parse::<SamplingMethod>().map_err(|_| bad())?;
        if tail == "none" && s.contains('+') {
            return Err(bad());
        }
        Ok(Protocol { pca, sampling })
    }
}

/// Train-fitted column transform: standardization, or principal-component
/// scores when PCA is on.
#[derive(Debug, Clone, PartialEq)]
pub enum Preprocessor {
    Standardize(Standardizer),
    Pca(PcaProjection),
}

impl Preprocessor {
    pub fn fit(train: &Array2<f64>, pca: bool) -> Result<Self> {
        Self::fit_with_threshold(train, pca, DEFAULT_PCA_THRESHOLD)
    }

    pub fn fit_with_threshold(train: &Array2<f64>, pca: bool, threshold: f64) -> Result<Self> {
        Ok(if pca {
            Preprocessor::Pca(pca_fit(train, threshold)?)
        } else {
            Preprocessor::Standardize(Standardizer::fit(train)?)
        })
    }

    pub fn transform(&self, m: &Array2<f64>) -> Array2<f64> {
        match self {
            Preprocessor::Standardize(s) => s.apply(m),
            Preprocessor::Pca(p) => pca_transform(m, p),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Preprocessor::Standardize(s) => s.means.len(),
            Preprocessor::Pca(p) => p.means.len(),
        }
    }

    /// Names of the transformed columns.
    pub fn output_names(&self, input: &[String]) -> Vec<String> {
        match self {
            Preprocessor::Standardize(_) => input.to_vec(),
            Preprocessor::Pca(p) => (1..=p.n_components).map(|k| format!("pc{k}")).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn protocol_names_round_trip() {
        for pca in [false, true] {
            for sampling in [SamplingMethod::None, SamplingMethod::Undersample, SamplingMethod::Smote] {
                let p = Protocol { pca, sampling };
                assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
            }
        }
        assert_eq!(Protocol::PLAIN.to_string(), "plain");
        assert!("raw".parse::<Protocol>().is_err());
        assert!("plain+none".parse::<Protocol>().is_err());
        assert!("pca+oversample".parse::<Protocol>().is_err());
    }

    #[test]
    fn pca_output_names() {
        let m = array![[1.0, 2.0], [2.0, 4.1], [3.0, 6.0], [4.0, 8.2]];
        let p = Preprocessor::fit(&m, true).unwrap();
        let names = p.output_names(&["a".into(), "b".into()]);
        assert_eq!(names, vec!["pc1".to_string()]);
        assert_eq!(p.transform(&m).ncols(), 1);
    }
}
