//! Batch front end: configuration, subcommands and the output manifest.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_describe, cmd_evaluate, cmd_features, cmd_learning_curve, cmd_predict, cmd_simulate, cmd_synth, cmd_train,
    simulation_plan, Completion, OutputDir, Overrides, MANIFEST_NAME,
};
pub use config::{LearningSettings, RunConfig, ThresholdMode};
