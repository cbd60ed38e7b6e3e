//! Inference cost accounting and per-layer L1 summaries.
//!
//! MAC convention: one multiply-accumulate per weight multiply of an affine
//! layer. Bias adds, ReLU, skip additions and the scalar priority multiply
//! are not counted. Parameters are every matrix entry, every bias entry and
//! one scalar per priority.

use serde::Serialize;

use crate::resnet::model::{FCResNetModel, UnitKind};

/// Reported depth convention: weighted units count 2 layers (their two
/// affine maps), transition units 3 (projection plus two affine maps) and
/// the head 1.
pub const LAYERS_PER_WEIGHTED_UNIT: usize = 2;
pub const LAYERS_PER_TRANSITION_UNIT: usize = 3;
pub const HEAD_LAYERS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerL1 {
    /// `None` for the classification head.
    pub unit_id: Option<u32>,
    pub layer: String,
    pub abs_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerNormSummary {
    pub layers: Vec<LayerL1>,
    /// `(unit id, factor)` in forward order, one per residual unit.
    pub unit_factors: Vec<(u32, f64)>,
}

impl LayerNormSummary {
    pub fn factors(&self) -> Vec<f64> {
        self.unit_factors.iter().map(|&(_, f)| f).collect()
    }
}

impl FCResNetModel {
    pub fn count_params(&self) -> u64 {
        let units: u64 = self.units.iter().map(|u| u.param_count()).sum();
        units + (self.head_w.len() + self.head_b.len()) as u64
    }

    pub fn count_macs(&self) -> u64 {
        let units: u64 = self.units.iter().map(|u| u.macs()).sum();
        units + self.head_w.len() as u64
    }

    pub fn count_layers(&self) -> usize {
        HEAD_LAYERS
            + self
                .units
                .iter()
                .map(|u| match u.kind {
                    UnitKind::Weighted => LAYERS_PER_WEIGHTED_UNIT,
                    UnitKind::Transition => LAYERS_PER_TRANSITION_UNIT,
                })
                .sum::<usize>()
    }

    /// Per-layer sums of absolute weights, and one factor per unit:
    /// `ΣA·ΣB·|w|` for weighted units, `ΣP + ΣA·ΣB` for transition units.
    pub fn layer_l1_bounds(&self) -> LayerNormSummary {
        let mut layers = Vec::new();
        let mut unit_factors = Vec::new();
        for u in &self.units {
            let sa = u.a.abs_sum();
            let sb = u.b.abs_sum();
            let factor = match u.kind {
                UnitKind::Weighted => sa * sb * u.priority().unwrap_or(0.0).abs(),
                UnitKind::Transition => {
                    let sp = u.projection.as_ref().map_or(0.0, |p| p.abs_sum());
                    layers.push(LayerL1 {
                        unit_id: Some(u.id),
                        layer: "P".into(),
                        abs_sum: sp,
                    });
                    sp + sa * sb
                }
            };
            layers.push(LayerL1 {
                unit_id: Some(u.id),
                layer: "A".into(),
                abs_sum: sa,
            });
            layers.push(LayerL1 {
                unit_id: Some(u.id),
                layer: "B".into(),
                abs_sum: sb,
            });
            unit_factors.push((u.id, factor));
        }
        layers.push(LayerL1 {
            unit_id: None,
            layer: "head".into(),
            abs_sum: self.head_w.abs_sum(),
        });
        LayerNormSummary {
            layers,
            unit_factors,
        }
    }
}
