//! Training, the priority-guided erase-and-retrain loop, and matched-budget
//! scratch baselines.

mod algorithm;
mod config;
mod train;

pub use algorithm::{
    baseline_budget, run_implosion, run_implosion_with, select_lowest, select_topk,
    stages_with_weighted_units, train_scratch_baseline, BaselineSpec, ImplosionState, RoundRecord,
};
pub use config::{matched_budget, ImplosionConfig, TrainingConfig};
pub use train::{evaluate, predict, train, Evaluation, MetricsRow};
