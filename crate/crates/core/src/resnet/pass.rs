//! Forward and backward passes.
//!
//! Rows of a batch are samples. With weights stored `(out, in)`, an affine
//! map over a batch is `X Wᵀ`.

use crate::error::{Error, Result};
use crate::numeric::{gemm, gemm_into, relu, relu_backward, Matrix2D, Trans};
use crate::resnet::model::{FCResNetModel, ResidualUnit, UnitKind};

/// Activations recorded by [`FCResNetModel::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    unit_ids: Vec<u32>,
    rows: usize,
    units: Vec<UnitCache>,
    head_input: Matrix2D,
}

#[derive(Debug, Clone)]
struct UnitCache {
    input: Matrix2D,
    pre: Matrix2D,
    hidden: Matrix2D,
    /// `F(x) = B relu(A x + a)` before the priority multiply.
    mapped: Matrix2D,
}

/// Gradients in the canonical tensor order of [`FCResNetModel::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Matrix2D>,
    priority_index: Vec<(u32, usize)>,
}

impl Gradients {
    pub fn tensors(&self) -> &[Matrix2D] {
        &self.tensors
    }

    /// `d loss / d w` for a weighted unit.
    pub fn priority(&self, id: u32) -> Option<f64> {
        self.priority_index
            .iter()
            .find(|(u, _)| *u == id)
            .map(|&(_, i)| self.tensors[i].data()[0])
    }

    /// All coordinates concatenated in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}

fn affine(x: &Matrix2D, w: &Matrix2D) -> Result<Matrix2D> {
    gemm(x, Trans::No, w, Trans::Yes)
}

impl ResidualUnit {
    fn forward_parts(&self, x: &Matrix2D) -> Result<(Matrix2D, Matrix2D, Matrix2D, Matrix2D)> {
        let mut pre = affine(x, &self.a)?;
        pre.add_row_broadcast(self.a_bias.data())?;
        let hidden = relu(&pre);
        let mapped = affine(&hidden, &self.b)?;
        let out = match self.kind {
            UnitKind::Weighted => {
                let w = self.priority().expect("weighted unit has a priority");
                let mut y = x.clone();
                y.axpy(w, &mapped)?;
                y
            }
            UnitKind::Transition => {
                let p = self
                    .projection
                    .as_ref()
                    .expect("transition has a projection");
                let mut y = affine(x, p)?;
                y.add_assign(&mapped)?;
                y
            }
        };
        Ok((out, pre, hidden, mapped))
    }
}

impl FCResNetModel {
    fn check_batch(&self, batch: &Matrix2D) -> Result<()> {
        if batch.cols() != self.input_width {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_width
            )));
        }
        Ok(())
    }

    /// Logits, one row of `class_count` values per input row.
    pub fn forward(&self, batch: &Matrix2D) -> Result<Matrix2D> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for u in &self.units {
            x = u.forward_parts(&x)?.0;
        }
        self.head(&x)
    }

    fn head(&self, x: &Matrix2D) -> Result<Matrix2D> {
        let mut logits = affine(x, &self.head_w)?;
        logits.add_row_broadcast(self.head_b.data())?;
        Ok(logits)
    }

    pub fn forward_cached(&self, batch: &Matrix2D) -> Result<(Matrix2D, ForwardCache)> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        let mut units = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let (y, pre, hidden, mapped) = u.forward_parts(&x)?;
            units.push(UnitCache {
                input: std::mem::replace(&mut x, y),
                pre,
                hidden,
                mapped,
            });
        }
        let logits = self.head(&x)?;
        let cache = ForwardCache {
            revision: self.revision,
            unit_ids: self.unit_ids(),
            rows: batch.rows(),
            units,
            head_input: x,
        };
        Ok((logits, cache))
    }

    /// Gradients of the loss whose logit gradient is `grad_logits`, for every
    /// parameter including each priority.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix2D) -> Result<Gradients> {
        if cache.revision != self.revision || cache.unit_ids != self.unit_ids() {
            return Err(Error::Usage(
                "forward cache was produced by a different model state".into(),
            ));
        }
        if grad_logits.shape() != (cache.rows, self.class_count) {
            return Err(Error::Shape(format!(
                "logit gradient is {}x{}, expected {}x{}",
                grad_logits.rows(),
                grad_logits.cols(),
                cache.rows,
                self.class_count
            )));
        }

        let head_dw = gemm(grad_logits, Trans::Yes, &cache.head_input, Trans::No)?;
        let head_db = Matrix2D::row_vector(&grad_logits.column_sums());
        let mut upstream = gemm(grad_logits, Trans::No, &self.head_w, Trans::No)?;

        // per-unit gradient lists, filled back to front
        let mut per_unit: Vec<Vec<Matrix2D>> = Vec::with_capacity(self.units.len());
        for (idx, (u, c)) in self.units.iter().zip(&cache.units).enumerate().rev() {
            let mut grads = Vec::with_capacity(5);
            // d_skip: gradient reaching x through the skip path, when it is
            // not simply `upstream` (transition units project it back).
            let (d_mapped, d_skip, d_priority) = match u.kind {
                UnitKind::Weighted => {
                    let w = u.priority().expect("weighted unit has a priority");
                    let dw = upstream.dot(&c.mapped)?;
                    (upstream.map(|g| w * g), None, Some(dw))
                }
                UnitKind::Transition => {
                    let p = u.projection.as_ref().expect("transition has a projection");
                    grads.push(gemm(&upstream, Trans::Yes, &c.input, Trans::No)?);
                    let d_skip = if idx > 0 {
                        Some(gemm(&upstream, Trans::No, p, Trans::No)?)
                    } else {
                        None
                    };
                    (upstream.clone(), d_skip, None)
                }
            };
            let db = gemm(&d_mapped, Trans::Yes, &c.hidden, Trans::No)?;
            let d_hidden = gemm(&d_mapped, Trans::No, &u.b, Trans::No)?;
            let d_pre = relu_backward(&c.pre, &d_hidden)?;
            grads.push(gemm(&d_pre, Trans::Yes, &c.input, Trans::No)?);
            grads.push(Matrix2D::row_vector(&d_pre.column_sums()));
            grads.push(db);
            if let Some(dw) = d_priority {
                grads.push(Matrix2D::row_vector(&[dw]));
            }

            // the input gradient of the first unit is never needed
            upstream = if idx > 0 {
                let mut dx = d_skip.unwrap_or(upstream);
                gemm_into(&d_pre, Trans::No, &u.a, Trans::No, 1.0, &mut dx)?;
                dx
            } else {
                Matrix2D::zeros(0, 0)
            };
            per_unit.push(grads);
        }
        per_unit.reverse();

        let mut tensors = Vec::new();
        let mut priority_index = Vec::new();
        for (u, grads) in self.units.iter().zip(per_unit) {
            tensors.extend(grads);
            if u.kind == UnitKind::Weighted {
                priority_index.push((u.id, tensors.len() - 1));
            }
        }
        tensors.push(head_dw);
        tensors.push(head_db);
        Ok(Gradients {
            tensors,
            priority_index,
        })
    }

    /// Copies `values` into the parameters, canonical order.
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.len()).sum();
        if total != values.len() {
            return Err(Error::Shape(format!(
                "{} values for {total} parameters",
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_check, softmax_cross_entropy, Rng};
    use crate::resnet::StageSpec;

    fn batch(rows: usize, cols: usize, seed: u64) -> Matrix2D {
        let mut rng = Rng::new(seed);
        let data = (0..rows * cols)
            .map(|_| rng.uniform() * 2.0 - 1.0)
            .collect();
        Matrix2D::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_priority_unit_is_identity() {
        let m = FCResNetModel::build(&[StageSpec::new(3, 5, 2)], 2, 3, 1.0, 4).unwrap();
        let u = &m.units()[1];
        let mut u0 = u.clone();
        u0.set_priority(0.0).unwrap();
        let x = batch(4, 3, 1);
        assert_eq!(u0.forward_parts(&x).unwrap().0, x);
    }

    #[test]
    fn zero_mapping_is_identity() {
        let m = FCResNetModel::build(&[StageSpec::new(3, 5, 2)], 2, 3, 1.0, 4).unwrap();
        let mut u = m.units()[1].clone();
        u.a = Matrix2D::zeros(5, 3);
        let x = batch(4, 3, 2);
        assert_eq!(u.forward_parts(&x).unwrap().0, x);
    }

    #[test]
    fn single_unit_hand_computed() {
        // one stage with only its transition unit: n0 = 2, stream 2, hidden 2
        let mut m = FCResNetModel::build(&[StageSpec::new(2, 2, 1)], 2, 2, 1.0, 0).unwrap();
        {
            let u = &mut m.units[0];
            u.projection = Some(Matrix2D::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap());
            u.a = Matrix2D::from_rows(&[[1.0, -1.0], [0.5, 0.5]]).unwrap();
            u.a_bias = Matrix2D::row_vector(&[0.0, -1.0]);
            u.b = Matrix2D::from_rows(&[[1.0, 1.0], [-1.0, 3.0]]).unwrap();
        }
        m.head_w = Matrix2D::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        m.head_b = Matrix2D::row_vector(&[0.5, 0.0]);
        // x = (3, 1): P x = (3, 2); A x + a = (2, 1); relu = (2, 1);
        // B h = (3, 1); stream = (6, 3); logits = (6.5, 9)
        let x = Matrix2D::row_vector(&[3.0, 1.0]);
        let logits = m.forward(&x).unwrap();
        assert_eq!(logits.data(), &[6.5, 9.0]);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let m = FCResNetModel::build(&[StageSpec::new(3, 5, 2)], 2, 3, 1.0, 4).unwrap();
        assert!(matches!(
            m.forward(&Matrix2D::zeros(2, 4)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn output_shape() {
        let m = FCResNetModel::build(
            &[StageSpec::new(3, 5, 2), StageSpec::new(2, 4, 2)],
            4,
            6,
            1.0,
            4,
        )
        .unwrap();
        assert_eq!(m.forward(&batch(7, 6, 3)).unwrap().shape(), (7, 4));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = FCResNetModel::build(&[StageSpec::new(3, 5, 3)], 2, 3, 1.0, 4).unwrap();
        let x = batch(2, 3, 5);
        let (logits, cache) = m.forward_cached(&x).unwrap();
        m.erase_units(&[2]).unwrap();
        assert!(matches!(
            m.backward(&cache, &Matrix2D::zeros(logits.rows(), 2)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn priority_gradient_zero_when_mapping_vanishes() {
        let mut m = FCResNetModel::build(&[StageSpec::new(3, 5, 2)], 2, 3, 1.0, 4).unwrap();
        m.unit_mut(1).unwrap().b = Matrix2D::zeros(3, 5);
        let x = batch(5, 3, 6);
        let (logits, cache) = m.forward_cached(&x).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[0, 1, 0, 1, 1]).unwrap();
        let grads = m.backward(&cache, &g).unwrap();
        assert_eq!(grads.priority(1), Some(0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let stages = [StageSpec::new(3, 4, 3), StageSpec::new(2, 3, 2)];
        let mut m = FCResNetModel::build(&stages, 3, 4, 1.0, 8).unwrap();
        m.unit_mut(1).unwrap().set_priority(0.7).unwrap();
        m.unit_mut(4).unwrap().set_priority(-1.3).unwrap();
        let x = batch(6, 4, 9);
        let labels = [0, 1, 2, 2, 1, 0];
        let (logits, cache) = m.forward_cached(&x).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
        let grads = m.backward(&cache, &g).unwrap();
        let theta = m.flat_params();
        let mut probe = m.clone();
        let err = finite_diff_check(
            |t| {
                probe.set_flat_params(t).unwrap();
                softmax_cross_entropy(&probe.forward(&x).unwrap(), &labels)
                    .unwrap()
                    .0
            },
            &theta,
            &grads.flatten(),
            1e-5,
        );
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn backward_deterministic() {
        let m = FCResNetModel::build(&[StageSpec::new(3, 5, 3)], 2, 3, 1.0, 4).unwrap();
        let x = batch(4, 3, 1);
        let (logits, cache) = m.forward_cached(&x).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[0, 1, 1, 0]).unwrap();
        assert_eq!(
            m.backward(&cache, &g).unwrap(),
            m.backward(&cache, &g).unwrap()
        );
    }
}
