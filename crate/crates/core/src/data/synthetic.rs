use serde::{Deserialize, Serialize};

use crate::data::{DatasetSplit, SplitTag};
use crate::error::{Error, Result};
use crate::numeric::{Matrix2D, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Isotropic Gaussian clusters centred on the unit circle.
    Blobs,
    /// Interleaved spiral arms, one per class, with Gaussian jitter.
    Spirals,
}

const SPIRAL_TURNS: f64 = 1.5;

/// Deterministic 2-D classification data. Samples are ordered point-major,
/// class-minor, so the classes interleave.
pub fn generate_synthetic(
    kind: SyntheticKind,
    per_class: usize,
    classes: usize,
    noise: f64,
    seed: u64,
    split: SplitTag,
) -> Result<DatasetSplit> {
    if per_class == 0 {
        return Err(Error::Data("need at least one sample per class".into()));
    }
    if classes < 2 {
        return Err(Error::Data("need at least two classes".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Data(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(per_class * classes * 2);
    let mut labels = Vec::with_capacity(per_class * classes);
    for i in 0..per_class {
        for c in 0..classes {
            let offset = tau * c as f64 / classes as f64;
            let (x, y) = match kind {
                SyntheticKind::Blobs => (offset.cos(), offset.sin()),
                SyntheticKind::Spirals => {
                    let t = (i as f64 + 1.0) / per_class as f64;
                    let angle = offset + tau * SPIRAL_TURNS * t;
                    (t * angle.cos(), t * angle.sin())
                }
            };
            let (jx, jy) = (rng.normal(), rng.normal());
            data.push(x + noise * jx);
            data.push(y + noise * jy);
            labels.push(c);
        }
    }
    let features = Matrix2D::from_vec(per_class * classes, 2, data)?;
    DatasetSplit::new(features, labels, classes, split)
}
