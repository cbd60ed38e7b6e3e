use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic, load_mnist, DatasetSplit, SplitTag, SyntheticKind};
use crate::error::{Error, Result};
use crate::implosion::{ImplosionConfig, TrainingConfig};
use crate::resnet::{validate_architecture, StageSpec};

/// Width of a flattened 28×28 IDX image.
pub const MNIST_WIDTH: usize = 784;
pub const MNIST_CLASSES: usize = 10;

/// Where the train and validation splits come from.
///
/// Relative paths are resolved against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        val_images: PathBuf,
        val_labels: PathBuf,
        /// Keep only the first this-many training samples.
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        val_limit: Option<usize>,
    },
    Synthetic {
        generator: SyntheticKind,
        per_class: usize,
        val_per_class: usize,
        classes: usize,
        noise: f64,
        seed: u64,
        /// Seed of the validation cloud; `seed + 1` when absent.
        #[serde(default)]
        val_seed: Option<u64>,
    },
}

impl DatasetSpec {
    /// `(feature width, class count)` the spec produces.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            DatasetSpec::Mnist { .. } => (MNIST_WIDTH, MNIST_CLASSES),
            DatasetSpec::Synthetic { classes, .. } => (2, *classes),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::Mnist {
                train_limit,
                val_limit,
                ..
            } => {
                if *train_limit == Some(0) || *val_limit == Some(0) {
                    return Err(Error::Config("dataset limits must be positive".into()));
                }
            }
            DatasetSpec::Synthetic {
                per_class,
                val_per_class,
                classes,
                noise,
                ..
            } => {
                if *per_class == 0 || *val_per_class == 0 {
                    return Err(Error::Config(
                        "synthetic sample counts must be positive".into(),
                    ));
                }
                if *classes < 2 {
                    return Err(Error::Config(
                        "synthetic data needs at least two classes".into(),
                    ));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::Config(format!(
                        "noise must be nonnegative, got {noise}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Loads or generates `(train, val)`.
    pub fn load(&self) -> Result<(DatasetSplit, DatasetSplit)> {
        match self {
            DatasetSpec::Mnist {
                train_images,
                train_labels,
                val_images,
                val_labels,
                train_limit,
                val_limit,
            } => {
                let mut train = load_mnist(train_images, train_labels, SplitTag::Train)?;
                let mut val = load_mnist(val_images, val_labels, SplitTag::Val)?;
                if let Some(n) = train_limit {
                    train = train.take(*n);
                }
                if let Some(n) = val_limit {
                    val = val.take(*n);
                }
                Ok((train, val))
            }
            DatasetSpec::Synthetic {
                generator,
                per_class,
                val_per_class,
                classes,
                noise,
                seed,
                val_seed,
            } => {
                let vs = val_seed.unwrap_or(seed.wrapping_add(1));
                let train = generate_synthetic(
                    *generator,
                    *per_class,
                    *classes,
                    *noise,
                    *seed,
                    SplitTag::Train,
                )?;
                let val = generate_synthetic(
                    *generator,
                    *val_per_class,
                    *classes,
                    *noise,
                    vs,
                    SplitTag::Val,
                )?;
                Ok((train, val))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub stages: Vec<StageSpec>,
    /// `M`
    pub classes: usize,
    /// `n0`
    pub input_width: usize,
    /// `N`: every feature lies in `[-N, N]`.
    pub input_bound: f64,
}

impl ArchitectureConfig {
    /// Weighted (erasable) units at construction.
    pub fn weighted_units(&self) -> usize {
        self.stages
            .iter()
            .map(|s| s.unit_count.saturating_sub(1))
            .sum()
    }
}

/// Scratch baselines compared against an implosion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Weighted-unit counts to train from scratch. Empty means every depth
    /// the implosion schedule passes through after the initial model.
    #[serde(default)]
    pub depths: Vec<usize>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub architecture: ArchitectureConfig,
    /// The `seed` fields of both schedules are replaced by the run seed.
    pub training: TrainingConfig,
    pub implosion: ImplosionConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    pub out_dir: PathBuf,
    /// Seeds model initialization and every shuffle.
    pub seed: u64,
}

/// Learning rate of the desk presets. The unnormalized fully-connected
/// model diverges at 0.1 on raw pixels; 0.01 is the largest power-of-ten
/// rate that trains stably.
pub const DESK_LEARNING_RATE: f64 = 0.01;

impl RunConfig {
    /// Small MNIST run: two stages of width 64/128 with ten weighted units,
    /// 40 initial epochs and 12 per retraining round, imploded to six units.
    pub fn desk() -> Self {
        let mnist = |f: &str| PathBuf::from("data/mnist").join(f);
        let training = TrainingConfig {
            learning_rate: DESK_LEARNING_RATE,
            epochs: 40,
            lr_milestones: vec![16, 24],
            ..TrainingConfig::standard_initial()
        };
        let retrain = TrainingConfig {
            epochs: 12,
            lr_milestones: vec![4, 8],
            ..training.clone()
        };
        Self {
            dataset: DatasetSpec::Mnist {
                train_images: mnist("train-images-idx3-ubyte"),
                train_labels: mnist("train-labels-idx1-ubyte"),
                val_images: mnist("val-images-idx3-ubyte"),
                val_labels: mnist("val-labels-idx1-ubyte"),
                train_limit: Some(10_000),
                val_limit: None,
            },
            architecture: ArchitectureConfig {
                stages: vec![StageSpec::new(64, 128, 6), StageSpec::new(64, 128, 6)],
                classes: MNIST_CLASSES,
                input_width: MNIST_WIDTH,
                input_bound: 1.0,
            },
            training,
            implosion: ImplosionConfig {
                k: 1,
                target_remaining: 6,
                retrain,
            },
            baseline: BaselineConfig::default(),
            out_dir: PathBuf::from("runs/desk"),
            seed: 1,
        }
        .with_seed(1)
    }

    /// Full-length schedules (200 initial epochs, 60 per round, decay at
    /// 81/122 and 20/40, lr 0.1) on a 27-unit, three-stage model imploded
    /// from 24 to 12 weighted units.
    pub fn full() -> Self {
        let desk = Self::desk();
        Self {
            architecture: ArchitectureConfig {
                stages: vec![StageSpec::new(64, 128, 9); 3],
                ..desk.architecture
            },
            training: TrainingConfig::standard_initial(),
            implosion: ImplosionConfig {
                k: 1,
                target_remaining: 12,
                retrain: TrainingConfig::standard_retrain(),
            },
            out_dir: PathBuf::from("runs/full"),
            ..desk
        }
        .with_seed(1)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected 'desk' or 'full')"
            ))),
        }
    }

    /// Parses and validates a JSON config, applying the run seed.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        let cfg = cfg.clone().with_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => {
                Error::Config(format!("{}: {e}", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the run seed and propagates it to both schedules.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self.implosion.retrain.seed = seed;
        self
    }

    /// Full validation; nothing touches the filesystem.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let a = &self.architecture;
        validate_architecture(&a.stages, a.classes, a.input_width, a.input_bound).map_err(cfg)?;
        self.dataset.validate()?;
        let (width, classes) = self.dataset.shape();
        if width != a.input_width {
            return Err(Error::Config(format!(
                "dataset width {width} does not match architecture input width {}",
                a.input_width
            )));
        }
        if classes > a.classes {
            return Err(Error::Config(format!(
                "dataset has {classes} classes but the architecture predicts {}",
                a.classes
            )));
        }
        self.training.validate().map_err(cfg)?;
        self.implosion
            .validate_for(a.weighted_units())
            .map_err(cfg)?;
        let eligible = a.weighted_units();
        if let Some(&d) = self.baseline.depths.iter().find(|&&d| d > eligible) {
            return Err(Error::Config(format!(
                "baseline depth {d} exceeds the {eligible} weighted units of the architecture"
            )));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("out_dir must not be empty".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
