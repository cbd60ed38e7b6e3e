//! IDX reader. Headers are big-endian: a magic word (`0x00000803` for
//! rank-3 unsigned-byte images, `0x00000801` for rank-1 labels) followed by
//! one 32-bit size per dimension.

use std::path::Path;

use crate::data::{DatasetSplit, SplitTag};
use crate::error::{Error, Result};
use crate::numeric::Matrix2D;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const MNIST_CLASSES: usize = 10;

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32(bytes, 4, "images")? as usize;
    let rows = read_u32(bytes, 8, "images")? as usize;
    let cols = read_u32(bytes, 12, "images")? as usize;
    let need = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("images: dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Format(format!(
            "images: truncated, header promises {need} bytes but {} remain",
            body.len()
        )));
    }
    Ok((n, rows, cols, &body[..need]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let n = read_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::Format(format!(
            "labels: truncated, header promises {n} labels but {} bytes remain",
            body.len()
        )));
    }
    Ok(&body[..n])
}

/// Builds a split from in-memory IDX bytes; pixels are scaled to `[0, 1]`.
pub fn mnist_from_bytes(images: &[u8], labels: &[u8], split: SplitTag) -> Result<DatasetSplit> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != n {
        return Err(Error::Format(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= MNIST_CLASSES) {
        return Err(Error::Format(format!("label {bad} is not a digit")));
    }
    let features = Matrix2D::from_vec(
        n,
        rows * cols,
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )?;
    DatasetSplit::new(
        features,
        labels.iter().map(|&y| y as usize).collect(),
        MNIST_CLASSES,
        split,
    )
}

pub fn load_mnist(images: &Path, labels: &Path, split: SplitTag) -> Result<DatasetSplit> {
    let read =
        |p: &Path| std::fs::read(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())));
    let (img, lab) = (read(images)?, read(labels)?);
    mnist_from_bytes(&img, &lab, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: u32, r: u32, c: u32, fill: u8) -> Vec<u8> {
        let mut v = IMAGES_MAGIC.to_be_bytes().to_vec();
        for d in [n, r, c] {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v.extend(std::iter::repeat_n(fill, (n * r * c) as usize));
        v
    }

    fn labels(ys: &[u8]) -> Vec<u8> {
        let mut v = LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(ys.len() as u32).to_be_bytes());
        v.extend_from_slice(ys);
        v
    }

    #[test]
    fn header_parsing() {
        let bytes = images(3, 28, 28, 0);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        let (n, r, c, px) = parse_idx_images(&bytes).unwrap();
        assert_eq!((n, r, c, px.len()), (3, 28, 28, 3 * 784));
        let d = mnist_from_bytes(&bytes, &labels(&[1, 2, 3]), SplitTag::Train).unwrap();
        assert_eq!((d.len(), d.width()), (3, 784));
    }

    #[test]
    fn full_brightness_is_one() {
        let d = mnist_from_bytes(&images(1, 2, 2, 255), &labels(&[7]), SplitTag::Val).unwrap();
        assert!(d.features().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = images(1, 2, 2, 0);
        bytes[3] = 0x01;
        assert!(matches!(parse_idx_images(&bytes), Err(Error::Format(_))));
        let swapped = mnist_from_bytes(&labels(&[1]), &images(1, 2, 2, 0), SplitTag::Train);
        assert!(matches!(swapped, Err(Error::Format(_))));
    }

    #[test]
    fn truncated() {
        let bytes = images(2, 2, 2, 9);
        assert!(parse_idx_images(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_idx_images(&bytes[..10]).is_err());
        let lab = labels(&[1, 2]);
        assert!(parse_idx_labels(&lab[..lab.len() - 1]).is_err());
    }

    #[test]
    fn count_mismatch() {
        let r = mnist_from_bytes(&images(2, 2, 2, 0), &labels(&[1, 2, 3]), SplitTag::Train);
        assert!(matches!(r, Err(Error::Format(_))));
    }

    #[test]
    fn non_digit_label() {
        let r = mnist_from_bytes(&images(1, 2, 2, 0), &labels(&[10]), SplitTag::Train);
        assert!(r.is_err());
    }
}
