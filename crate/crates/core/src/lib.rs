//! Training-load analytics and injury-prediction evaluation.
//!
//! The crate turns raw session, injury and roster tables into a labeled
//! daily panel of workload features, fits several classifier families under
//! imbalance-aware preprocessing, and evaluates them with ROC analysis,
//! cost-ratio operating points, repeated simulations and learning curves.

pub mod cli;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod load_metrics;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
