use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{he_init, Matrix2D, Rng};

/// One stage: a run of residual units sharing a stream width. The first unit
/// of every stage is a transition unit that projects into `stream_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub stream_width: usize,
    pub hidden_width: usize,
    pub unit_count: usize,
}

impl StageSpec {
    pub fn new(stream_width: usize, hidden_width: usize, unit_count: usize) -> Self {
        Self {
            stream_width,
            hidden_width,
            unit_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    /// `P x + B relu(A x + a)`; first unit of a stage, never erased.
    Transition,
    /// `x + w B relu(A x + a)`.
    Weighted,
}

/// A residual unit with bottleneck mapping `F(x) = B relu(A x + a)`.
///
/// Weights are stored `(out, in)`. The bias is a `1 x hidden` row and the
/// priority a `1 x 1` matrix so the optimizer can treat every parameter as a
/// tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualUnit {
    pub(crate) id: u32,
    pub(crate) stage: usize,
    pub(crate) kind: UnitKind,
    pub(crate) projection: Option<Matrix2D>,
    pub(crate) a: Matrix2D,
    pub(crate) a_bias: Matrix2D,
    pub(crate) b: Matrix2D,
    pub(crate) priority: Option<Matrix2D>,
}

impl ResidualUnit {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }

    pub fn input_width(&self) -> usize {
        self.a.cols()
    }

    pub fn hidden_width(&self) -> usize {
        self.a.rows()
    }

    pub fn output_width(&self) -> usize {
        self.b.rows()
    }

    pub fn projection(&self) -> Option<&Matrix2D> {
        self.projection.as_ref()
    }

    pub fn a(&self) -> &Matrix2D {
        &self.a
    }

    pub fn a_bias(&self) -> &[f64] {
        self.a_bias.data()
    }

    pub fn b(&self) -> &Matrix2D {
        &self.b
    }

    /// The priority `w` of a weighted unit; `None` for transitions.
    pub fn priority(&self) -> Option<f64> {
        self.priority.as_ref().map(|w| w.data()[0])
    }

    pub fn set_priority(&mut self, w: f64) -> Result<()> {
        match self.priority.as_mut() {
            Some(p) => {
                p.data_mut()[0] = w;
                Ok(())
            }
            None => Err(Error::Ineligible(self.id)),
        }
    }

    pub fn a_mut(&mut self) -> &mut Matrix2D {
        &mut self.a
    }

    pub fn b_mut(&mut self) -> &mut Matrix2D {
        &mut self.b
    }

    pub fn a_bias_mut(&mut self) -> &mut [f64] {
        self.a_bias.data_mut()
    }

    pub fn macs(&self) -> u64 {
        let (i, h, o) = (
            self.input_width() as u64,
            self.hidden_width() as u64,
            self.output_width() as u64,
        );
        let proj = if self.projection.is_some() { i * o } else { 0 };
        proj + i * h + h * o
    }

    pub fn param_count(&self) -> u64 {
        let h = self.hidden_width() as u64;
        let w = if self.priority.is_some() { 1 } else { 0 };
        self.macs() + h + w
    }
}

/// Role of a tensor, used for weight-decay masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
    Priority,
}

/// Identifies one parameter tensor in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub role: TensorRole,
    pub shape: (usize, usize),
    /// Logical rank stored in checkpoints: 2 for matrices, 1 for biases, 0
    /// for the scalar priority.
    pub rank: usize,
}

/// The fully-connected ResNet: staged residual units followed by an affine
/// classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct FCResNetModel {
    pub(crate) stages: Vec<StageSpec>,
    pub(crate) input_width: usize,
    pub(crate) class_count: usize,
    pub(crate) input_bound: f64,
    pub(crate) units: Vec<ResidualUnit>,
    pub(crate) head_w: Matrix2D,
    pub(crate) head_b: Matrix2D,
    pub(crate) next_id: u32,
    pub(crate) revision: u64,
}

pub fn validate_architecture(
    stages: &[StageSpec],
    class_count: usize,
    input_width: usize,
    input_bound: f64,
) -> Result<()> {
    if stages.is_empty() {
        return Err(Error::InvalidArchitecture(
            "at least one stage is required".into(),
        ));
    }
    if class_count < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "class count must be at least 2, got {class_count}"
        )));
    }
    if input_width == 0 {
        return Err(Error::InvalidArchitecture(
            "input width must be positive".into(),
        ));
    }
    if !(input_bound > 0.0 && input_bound.is_finite()) {
        return Err(Error::InvalidArchitecture(format!(
            "input bound must be positive, got {input_bound}"
        )));
    }
    for (i, s) in stages.iter().enumerate() {
        if s.stream_width == 0 || s.hidden_width == 0 || s.unit_count == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "stage {i}: widths and unit count must be positive"
            )));
        }
        if s.hidden_width < s.stream_width {
            return Err(Error::InvalidArchitecture(format!(
                "stage {i}: hidden width {} is smaller than stream width {}",
                s.hidden_width, s.stream_width
            )));
        }
    }
    Ok(())
}

/// Scale applied to the He-initialized output layer `B` of every residual
/// branch: `1 / sqrt(total units)`.
///
/// Each unit multiplies the second moment of the stream by about
/// `1 + 2 * scale^2`, so the whole stack grows it by at most `e^2` instead
/// of `3^units`; without normalization layers the unscaled stack overflows
/// the logits of a ten-unit model.
pub fn branch_output_scale(stages: &[StageSpec]) -> f64 {
    let units: usize = stages.iter().map(|s| s.unit_count).sum();
    1.0 / (units.max(1) as f64).sqrt()
}

impl FCResNetModel {
    /// He-initialized model with zero biases and every priority at 1.0.
    pub fn build(
        stages: &[StageSpec],
        class_count: usize,
        input_width: usize,
        input_bound: f64,
        seed: u64,
    ) -> Result<Self> {
        validate_architecture(stages, class_count, input_width, input_bound)?;
        let mut rng = Rng::new(seed);
        let branch_scale = branch_output_scale(stages);
        let mut units = Vec::new();
        let mut id = 0u32;
        let mut width_in = input_width;
        for (stage, spec) in stages.iter().enumerate() {
            let (s, h) = (spec.stream_width, spec.hidden_width);
            for j in 0..spec.unit_count {
                let transition = j == 0;
                let inw = if transition { width_in } else { s };
                let projection = transition.then(|| he_init(s, inw, &mut rng));
                let a = he_init(h, inw, &mut rng);
                let mut b = he_init(s, h, &mut rng);
                for v in b.data_mut() {
                    *v *= branch_scale;
                }
                units.push(ResidualUnit {
                    id,
                    stage,
                    kind: if transition {
                        UnitKind::Transition
                    } else {
                        UnitKind::Weighted
                    },
                    projection,
                    a,
                    a_bias: Matrix2D::zeros(1, h),
                    b,
                    priority: (!transition).then(|| Matrix2D::row_vector(&[1.0])),
                });
                id += 1;
            }
            width_in = s;
        }
        let head_w = he_init(class_count, width_in, &mut rng);
        Ok(Self {
            stages: stages.to_vec(),
            input_width,
            class_count,
            input_bound,
            units,
            head_w,
            head_b: Matrix2D::zeros(1, class_count),
            next_id: id,
            revision: 0,
        })
    }

    /// Stage layout the model was built with (unit counts before erasure).
    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    /// Stage layout of the surviving units.
    pub fn current_stage_specs(&self) -> Vec<StageSpec> {
        self.stages
            .iter()
            .enumerate()
            .map(|(i, s)| StageSpec {
                unit_count: self.units.iter().filter(|u| u.stage == i).count(),
                ..*s
            })
            .collect()
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    pub fn units(&self) -> &[ResidualUnit] {
        &self.units
    }

    pub fn unit(&self, id: u32) -> Option<&ResidualUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn unit_mut(&mut self, id: u32) -> Option<&mut ResidualUnit> {
        self.units.iter_mut().find(|u| u.id == id)
    }

    pub fn unit_ids(&self) -> Vec<u32> {
        self.units.iter().map(|u| u.id).collect()
    }

    pub fn head_weight(&self) -> &Matrix2D {
        &self.head_w
    }

    pub fn head_bias(&self) -> &[f64] {
        self.head_b.data()
    }

    /// Bumped whenever the unit sequence changes; forward caches record it.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Ids of all weighted units in forward order. Transition units (the
    /// first unit of each stage) are never eligible.
    pub fn eligible_units(&self) -> Vec<u32> {
        self.units
            .iter()
            .filter(|u| u.kind == UnitKind::Weighted)
            .map(|u| u.id)
            .collect()
    }

    /// `(id, |w|)` for every eligible unit, in forward order.
    pub fn priorities(&self) -> Vec<(u32, f64)> {
        self.units
            .iter()
            .filter_map(|u| u.priority().map(|w| (u.id, w.abs())))
            .collect()
    }

    /// Removes the listed weighted units. Validation happens before any
    /// change, so on error the model is untouched.
    pub fn erase_units(&mut self, ids: &[u32]) -> Result<()> {
        for &id in ids {
            match self.unit(id) {
                Some(u) if u.kind == UnitKind::Weighted => {}
                _ => return Err(Error::Ineligible(id)),
            }
        }
        let mut seen = ids.to_vec();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Usage(format!("unit {} listed twice", w[0])));
        }
        self.units.retain(|u| !ids.contains(&u.id));
        self.revision += 1;
        Ok(())
    }

    /// Parameter tensors in canonical order: per unit `P` (transitions),
    /// `A`, `a`, `B`, `w` (weighted), then the head weight and bias.
    pub fn tensors(&self) -> Vec<&Matrix2D> {
        let mut out = Vec::new();
        for u in &self.units {
            if let Some(p) = &u.projection {
                out.push(p);
            }
            out.push(&u.a);
            out.push(&u.a_bias);
            out.push(&u.b);
            if let Some(w) = &u.priority {
                out.push(w);
            }
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix2D> {
        let mut out = Vec::new();
        for u in &mut self.units {
            if let Some(p) = &mut u.projection {
                out.push(p);
            }
            out.push(&mut u.a);
            out.push(&mut u.a_bias);
            out.push(&mut u.b);
            if let Some(w) = &mut u.priority {
                out.push(w);
            }
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn tensor_infos(&self) -> Vec<TensorInfo> {
        let mut out = Vec::new();
        let info = |name: String, role: TensorRole, m: &Matrix2D| {
            let rank = match role {
                TensorRole::Weight => 2,
                TensorRole::Bias => 1,
                TensorRole::Priority => 0,
            };
            TensorInfo {
                name,
                role,
                shape: m.shape(),
                rank,
            }
        };
        for u in &self.units {
            if let Some(p) = &u.projection {
                out.push(info(format!("unit{}.P", u.id), TensorRole::Weight, p));
            }
            out.push(info(format!("unit{}.A", u.id), TensorRole::Weight, &u.a));
            out.push(info(format!("unit{}.a", u.id), TensorRole::Bias, &u.a_bias));
            out.push(info(format!("unit{}.B", u.id), TensorRole::Weight, &u.b));
            if let Some(w) = &u.priority {
                out.push(info(format!("unit{}.w", u.id), TensorRole::Priority, w));
            }
        }
        out.push(info("head.W".into(), TensorRole::Weight, &self.head_w));
        out.push(info("head.b".into(), TensorRole::Bias, &self.head_b));
        out
    }

    pub fn stream_width(&self) -> usize {
        self.head_w.cols()
    }

    /// Reassembles a model from checkpoint parts, checking every width.
    #[allow(clippy::too_many_arguments)] // one argument per stored field
    pub(crate) fn from_parts(
        stages: Vec<StageSpec>,
        class_count: usize,
        input_width: usize,
        input_bound: f64,
        units: Vec<ResidualUnit>,
        head_w: Matrix2D,
        head_b: Matrix2D,
        next_id: u32,
    ) -> Result<Self> {
        validate_architecture(&stages, class_count, input_width, input_bound)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bad = |msg: String| Err(Error::Format(msg));
        let mut width = input_width;
        let mut seen_stage = vec![false; stages.len()];
        let mut last_id = None;
        for u in &units {
            if u.stage >= stages.len() {
                return bad(format!("unit {} refers to stage {}", u.id, u.stage));
            }
            if last_id.is_some_and(|l| u.id <= l) || u.id >= next_id {
                return bad(format!("unit id {} out of order", u.id));
            }
            last_id = Some(u.id);
            let spec = stages[u.stage];
            let first = !seen_stage[u.stage];
            seen_stage[u.stage] = true;
            let expect_kind = if first {
                UnitKind::Transition
            } else {
                UnitKind::Weighted
            };
            if u.kind != expect_kind {
                return bad(format!("unit {} has the wrong kind for its position", u.id));
            }
            if first && seen_stage[u.stage + 1..].iter().any(|&s| s) {
                return bad(format!("stage {} out of order", u.stage));
            }
            let (s, h) = (spec.stream_width, spec.hidden_width);
            let shapes_ok = u.a.shape() == (h, width)
                && u.a_bias.shape() == (1, h)
                && u.b.shape() == (s, h)
                && match u.kind {
                    UnitKind::Transition => {
                        u.projection.as_ref().map(|p| p.shape()) == Some((s, width))
                            && u.priority.is_none()
                    }
                    UnitKind::Weighted => {
                        width == s
                            && u.projection.is_none()
                            && u.priority.as_ref().map(|p| p.shape()) == Some((1, 1))
                    }
                };
            if !shapes_ok {
                return bad(format!("unit {} has inconsistent tensor shapes", u.id));
            }
            width = s;
        }
        if seen_stage.iter().any(|&s| !s) {
            return bad("a stage lost its transition unit".into());
        }
        if head_w.shape() != (class_count, width) || head_b.shape() != (1, class_count) {
            return bad("head shape does not match the stream width".into());
        }
        Ok(Self {
            stages,
            input_width,
            class_count,
            input_bound,
            units,
            head_w,
            head_b,
            next_id,
            revision: 0,
        })
    }

    pub(crate) fn next_id(&self) -> u32 {
        self.next_id
    }
}
