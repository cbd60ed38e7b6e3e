//! Dense linear algebra, activations, loss, initialization and the optimizer.

mod gradcheck;
mod matrix;
mod ops;
mod optim;
mod rng;

pub use gradcheck::{finite_diff_check, relative_error};
pub use matrix::{gemm, gemm_into, Matrix2D, Trans};
pub use ops::{he_init, relu, relu_backward, softmax, softmax_cross_entropy};
pub use optim::OptimizerState;
pub use rng::Rng;
