//! Experiment orchestration for ordering-strategy sweeps, plus the
//! machine-checkable verification suites behind `ordlab verify`.

pub mod experiment;
pub mod report;
pub mod verify;

pub use experiment::{
    rank_strategies, run_experiment, ExperimentConfig, ExperimentOutput, ModelParams, ResultRow,
    Strategy, StrategyRank,
};
