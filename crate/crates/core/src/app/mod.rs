//! Run configuration, checkpoints, CSV/JSON artifacts and the bodies of the
//! `nimp` subcommands.

mod checkpoint;
mod config;
mod report;
mod run;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint, save_checkpoint,
    save_checkpoint_tagged, CheckpointHeader, UnitHeader, FORMAT_VERSION, MAGIC,
};
pub use config::{
    ArchitectureConfig, BaselineConfig, DatasetSpec, RunConfig, DESK_LEARNING_RATE, MNIST_CLASSES,
    MNIST_WIDTH,
};
pub use report::{
    implosion_curve, layer_convention_comment, write_bounds_csv, write_curve_csv, write_json,
    write_metrics_csv, CurvePoint, BOUNDS_HEADER, CURVE_HEADER, METRICS_HEADER,
};
pub use run::{
    baseline_checkpoint_name, implosion_depths, inspect_table, matched_epochs, model_bound_inputs,
    round_checkpoint_name, run_baseline, run_bounds, run_eval, run_implode, run_train,
    BoundsRequest, ImplodeOutcome, MarginSettings, OutputLock, TrainOutcome, BASELINE_CURVE_FILE,
    BASELINE_METRICS_FILE, BOUNDS_CSV_FILE, BOUNDS_JSON_FILE, CONFIG_FILE, CURVE_FILE,
    INITIAL_FILE, LOCK_FILE, METRICS_FILE, MODEL_FILE, ROUNDS_FILE,
};
