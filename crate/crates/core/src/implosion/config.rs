use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SGD-with-momentum training schedule with step learning-rate decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Epochs at which the learning rate is multiplied by `lr_factor`.
    pub lr_milestones: Vec<usize>,
    #[serde(default = "default_lr_factor")]
    pub lr_factor: f64,
    pub batch_size: usize,
    /// Shuffle seed; run configs overwrite it with the run seed.
    #[serde(default)]
    pub seed: u64,
    /// Apply weight decay to the unit priorities as well.
    #[serde(default = "default_true")]
    pub decay_priorities: bool,
}

fn default_lr_factor() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

impl TrainingConfig {
    /// 200 epochs, decay at 81 and 122, batch 128, lr 0.1, momentum 0.9,
    /// weight decay 1e-4.
    pub fn standard_initial() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 200,
            lr_milestones: vec![81, 122],
            lr_factor: 0.1,
            batch_size: 128,
            seed: 0,
            decay_priorities: true,
        }
    }

    /// 60 epochs at the initial learning rate, decay at 20 and 40.
    pub fn standard_retrain() -> Self {
        Self {
            epochs: 60,
            lr_milestones: vec![20, 40],
            ..Self::standard_initial()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor.is_finite()) {
            return bad(format!(
                "lr_factor must be positive, got {}",
                self.lr_factor
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.lr_milestones.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "lr_milestones must be strictly increasing, got {:?}",
                self.lr_milestones
            ));
        }
        if let Some(&last) = self.lr_milestones.last() {
            if last >= self.epochs {
                return bad(format!(
                    "milestone {last} is not below the epoch count {}",
                    self.epochs
                ));
            }
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.lr_milestones.iter().filter(|&&m| m <= epoch).count();
        self.learning_rate * self.lr_factor.powi(decays as i32)
    }

    /// Same schedule stretched to `epochs`, milestones scaled
    /// proportionally (rounded to the nearest epoch).
    pub fn rescaled(&self, epochs: usize) -> Self {
        let mut milestones: Vec<usize> = if self.epochs == 0 {
            Vec::new()
        } else {
            self.lr_milestones
                .iter()
                .map(|&m| ((m * epochs) as f64 / self.epochs as f64).round() as usize)
                .filter(|&m| m > 0 && m < epochs)
                .collect()
        };
        milestones.dedup();
        Self {
            epochs,
            lr_milestones: milestones,
            ..self.clone()
        }
    }
}

/// Erase-and-retrain loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImplosionConfig {
    /// Units erased per round.
    pub k: usize,
    /// Stop once at most this many eligible units remain.
    pub target_remaining: usize,
    pub retrain: TrainingConfig,
}

impl ImplosionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.retrain.validate()
    }

    /// Number of rounds needed from `eligible` units: `⌈(eligible - L')/k⌉`.
    pub fn rounds_from(&self, eligible: usize) -> usize {
        eligible
            .saturating_sub(self.target_remaining)
            .div_ceil(self.k.max(1))
    }

    /// Checks the loop can run to completion on a model with `eligible`
    /// erasable units.
    pub fn validate_for(&self, eligible: usize) -> Result<()> {
        self.validate()?;
        if self.target_remaining > eligible {
            return Err(Error::Config(format!(
                "target {} exceeds the {eligible} eligible units",
                self.target_remaining
            )));
        }
        let rounds = self.rounds_from(eligible);
        if rounds * self.k > eligible {
            return Err(Error::Config(format!(
                "{rounds} rounds of k = {} would erase more than the {eligible} eligible units",
                self.k
            )));
        }
        Ok(())
    }
}

/// Total epochs a scratch baseline gets to match an implosion run.
pub fn matched_budget(initial_epochs: usize, rounds: usize, retrain_epochs: usize) -> usize {
    initial_epochs + rounds * retrain_epochs
}
