//! Labeled datasets: IDX (MNIST) files and synthetic 2-D point clouds.

mod idx;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use idx::{load_mnist, parse_idx_images, parse_idx_labels, IMAGES_MAGIC, LABELS_MAGIC};
pub use synthetic::{generate_synthetic, SyntheticKind};

use crate::error::{Error, Result};
use crate::numeric::Matrix2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    features: Matrix2D,
    labels: Vec<usize>,
    classes: usize,
    split: SplitTag,
}

impl DatasetSplit {
    pub fn new(
        features: Matrix2D,
        labels: Vec<usize>,
        classes: usize,
        split: SplitTag,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Data(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn features(&self) -> &Matrix2D {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows `indices`, in that order.
    pub fn batch(&self, indices: &[usize]) -> (Matrix2D, Vec<usize>) {
        (
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn take(&self, n: usize) -> DatasetSplit {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (features, labels) = self.batch(&idx);
        DatasetSplit {
            features,
            labels,
            classes: self.classes,
            split: self.split,
        }
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    /// Largest absolute feature value.
    pub fn max_abs(&self) -> f64 {
        self.features.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_rows_rejected() {
        let f = Matrix2D::zeros(3, 2);
        assert!(DatasetSplit::new(f.clone(), vec![0, 1], 2, SplitTag::Train).is_err());
        assert!(DatasetSplit::new(f, vec![0, 1, 2], 2, SplitTag::Train).is_err());
    }

    #[test]
    fn batch_and_take() {
        let f = Matrix2D::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let d = DatasetSplit::new(f, vec![0, 1, 0], 2, SplitTag::Val).unwrap();
        let (x, y) = d.batch(&[2, 0]);
        assert_eq!(x.data(), &[2.0, 0.0]);
        assert_eq!(y, vec![0, 0]);
        assert_eq!(d.take(2).len(), 2);
        assert_eq!(d.take(10).len(), 3);
        assert_eq!(d.max_abs(), 2.0);
    }
}
