//! The fully-connected ResNet with priority-weighted residual units.

mod accounting;
mod model;
mod pass;

pub use accounting::{
    LayerL1, LayerNormSummary, HEAD_LAYERS, LAYERS_PER_TRANSITION_UNIT, LAYERS_PER_WEIGHTED_UNIT,
};
pub use model::{
    validate_architecture, FCResNetModel, ResidualUnit, StageSpec, TensorInfo, TensorRole, UnitKind,
};
pub use pass::{ForwardCache, Gradients};
