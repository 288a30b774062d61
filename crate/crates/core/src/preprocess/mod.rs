//! Imputation, scaling, PCA and class-imbalance resampling.
//!
//! Every `fit` here sees training rows only; test rows are transformed with
//! the fitted parameters.

mod impute;
mod pca;
mod protocol;
mod sampling;
mod scale;

pub use impute::{pmm_impute, pmm_impute_from, PmmOptions};
pub use pca::{pca_fit, pca_transform, PcaProjection, DEFAULT_PCA_THRESHOLD};
pub use protocol::{Preprocessor, Protocol};
pub use sampling::{smote, undersample, Resampled, RowOrigin, SamplingMethod, SamplingPlan};
pub use scale::{apply_standardize, standardize, Standardizer};
