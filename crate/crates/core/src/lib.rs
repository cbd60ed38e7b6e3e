//! Layer pruning for fully-connected ResNets by priority-guided erasure of
//! residual units followed by retraining, plus closed-form evaluation of the
//! linear-region and Rademacher-complexity bounds that motivate it.
//!
//! Modules:
//! - [`numeric`]: matrices, seeded RNG, activations, loss, SGD with momentum.
//! - [`resnet`]: the model, its passes, erasure and cost accounting.
//! - [`implosion`]: training, the erase-and-retrain loop, scratch baselines.
//! - [`bounds`]: region counts, Rademacher and generalization bounds.
//! - [`app`]: configs, datasets, checkpoints, CSV reports and the CLI.

pub mod app;
pub mod bounds;
pub mod data;
pub mod error;
pub mod implosion;
pub mod numeric;
pub mod resnet;

pub use error::{Error, Result};
