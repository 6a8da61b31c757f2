//! Training loops, evaluation, the multi-split experiment protocol and the
//! file-level commands used by the `pmu-gaf` binary.

pub mod commands;
mod config;
mod experiment;
mod train;

pub use config::{CnnHyper, DatasetSource, ExperimentConfig, RecurrentHyper};
pub use experiment::{
    run_cell, run_experiment, run_experiment_on, without_wall_time, CellReport, DatasetSummary,
    ExperimentReport, TRAIN_ACCURACY_TARGET,
};
pub use train::{
    build_network, encode_dataset, epochs_to_threshold, evaluate_network, train_model,
    train_network, training_setup, EpochStats, Evaluation, TrainSpec, TrainedModel,
};
