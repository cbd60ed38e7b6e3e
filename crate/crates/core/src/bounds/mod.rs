//! Linear-region lower bounds, Rademacher upper bounds, margins and the
//! margin-based generalization bound, evaluated in closed form.
//!
//! Unit indices `l'` are 1-based throughout, matching the product notation
//! of the formulas.

mod margin;
mod rademacher;
mod regions;
mod report;

pub use margin::{
    complexity_coefficient, empirical_margin_error, erasure_condition, generalization_bound,
    margin, ErasureCondition,
};
pub use rademacher::{erasure_tightens, rademacher_bound, rademacher_bound_after_erasure};
pub use regions::{binomial_prefix_sum, count_paths, region_bound, region_bound_after_erasure};
pub use report::{ArchitectureSignature, BoundInputs, BoundReport, LOG_CONVENTION};
