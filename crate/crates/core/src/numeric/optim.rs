//! Heavy-ball SGD with weight decay folded into the gradient:
//!
//! ```text
//! v <- momentum * v + (g + weight_decay * theta)
//! theta <- theta - learning_rate * v
//! ```
//!
//! No Nesterov correction and no dampening.

use crate::error::{Error, Result};
use crate::numeric::Matrix2D;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub momentum: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    velocity: Vec<Matrix2D>,
    decay_mask: Vec<bool>,
}

impl OptimizerState {
    /// Zero velocity shaped like `shapes`; `decay_mask[i]` says whether
    /// tensor `i` receives weight decay.
    pub fn new(
        shapes: &[(usize, usize)],
        decay_mask: Vec<bool>,
        momentum: f64,
        learning_rate: f64,
        weight_decay: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0,1), got {momentum}"
            )));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be nonnegative, got {weight_decay}"
            )));
        }
        if decay_mask.len() != shapes.len() {
            return Err(Error::Shape(format!(
                "decay mask has {} entries for {} tensors",
                decay_mask.len(),
                shapes.len()
            )));
        }
        Ok(Self {
            momentum,
            learning_rate,
            weight_decay,
            velocity: shapes.iter().map(|&(r, c)| Matrix2D::zeros(r, c)).collect(),
            decay_mask,
        })
    }

    pub fn velocity(&self) -> &[Matrix2D] {
        &self.velocity
    }

    pub fn velocity_mut(&mut self) -> &mut [Matrix2D] {
        &mut self.velocity
    }

    /// One update of every tensor, in order.
    pub fn step(&mut self, params: &mut [&mut Matrix2D], grads: &[&Matrix2D]) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::Shape(format!(
                "{} params / {} grads for {} velocity tensors",
                params.len(),
                grads.len(),
                self.velocity.len()
            )));
        }
        for ((p, g), v) in params.iter().zip(grads).zip(&self.velocity) {
            p.check_same_shape(g, "sgd grad")?;
            p.check_same_shape(v, "sgd velocity")?;
        }
        let (mu, lr) = (self.momentum, self.learning_rate);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let wd = if self.decay_mask[i] {
                self.weight_decay
            } else {
                0.0
            };
            let v = &mut self.velocity[i];
            for ((theta, &grad), vel) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(v.data_mut().iter_mut())
            {
                *vel = mu * *vel + (grad + wd * *theta);
                *theta -= lr * *vel;
            }
        }
        Ok(())
    }
}
