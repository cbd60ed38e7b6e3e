use crate::error::{Error, Result};
use crate::numeric::{Matrix2D, Rng};

pub fn relu(x: &Matrix2D) -> Matrix2D {
    x.map(|v| v.max(0.0))
}

/// Gradient through `relu`: `upstream` where `x > 0`, zero elsewhere.
pub fn relu_backward(x: &Matrix2D, upstream: &Matrix2D) -> Result<Matrix2D> {
    x.check_same_shape(upstream, "relu_backward")?;
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    Matrix2D::from_vec(x.rows(), x.cols(), data)
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax(logits: &Matrix2D) -> Matrix2D {
    let cols = logits.cols();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(cols.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Mean cross-entropy of the softmax of `logits` against integer labels,
/// together with its gradient with respect to `logits`.
pub fn softmax_cross_entropy(logits: &Matrix2D, labels: &[usize]) -> Result<(f64, Matrix2D)> {
    let (n, classes) = logits.shape();
    if n != labels.len() {
        return Err(Error::Shape(format!(
            "{n} logit rows for {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    if n == 0 {
        return Ok((0.0, Matrix2D::zeros(0, classes)));
    }
    let mut grad = Matrix2D::zeros(n, classes);
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[y] - max - log_total;
        for (c, &v) in row.iter().enumerate() {
            let p = (v - max - log_total).exp();
            let target = if c == y { 1.0 } else { 0.0 };
            grad.set(i, c, (p - target) * scale);
        }
    }
    Ok((loss * scale, grad))
}

/// He-normal initialization for a weight matrix of shape `(out, in)`:
/// i.i.d. N(0, 2 / fan_in) with `fan_in = cols`.
pub fn he_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix2D {
    let std = (2.0 / cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Matrix2D::from_vec(rows, cols, data).expect("length matches by construction")
}
