//! ROC analysis, cost-based operating points, repeated-run summaries,
//! subgroup splits, learning curves and descriptive contrasts.

mod cost;
mod describe;
mod learning;
mod roc;
mod simulate;
mod subgroup;

pub use cost::{expected_cost, operating_point, optimal_operating_point, point_at_threshold, OperatingPoint};
pub use describe::{describe_features, median, FeatureContrast};
pub use learning::{default_sizes, learning_curve, stratified_subsample, LearningCurvePlan, LearningPoint, MIN_SUBSAMPLE_POSITIVES};
pub use roc::{auc, rank_biserial, roc_curve, RocCurve};
pub use simulate::{
    run_simulations, simulation_seed, CellKey, CellSummary, SimRecord, SimulationPlan, SimulationSummary,
    DEFAULT_SIMULATIONS,
};
pub use subgroup::{subgroup_auc, GroupAuc, GroupStatus, SubgroupReport, MIN_RELIABLE_POSITIVES};
