use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::Matrix2D;

/// `f(x, y) - max_{z != y} f(x, z)`; negative iff the sample is misclassified.
pub fn margin(scores: &[f64], label: usize) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::Domain(
            "a margin needs at least two class scores".into(),
        ));
    }
    if label >= scores.len() {
        return Err(Error::Domain(format!(
            "label {label} out of range for {} classes",
            scores.len()
        )));
    }
    let rival = scores
        .iter()
        .enumerate()
        .filter(|&(z, _)| z != label)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(scores[label] - rival)
}

/// Fraction of rows whose margin is at most `rho`.
pub fn empirical_margin_error(scores: &Matrix2D, labels: &[usize], rho: f64) -> Result<f64> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Domain(format!(
            "margin coefficient must be positive, got {rho}"
        )));
    }
    if scores.rows() == 0 {
        return Err(Error::Domain("empirical error of an empty sample".into()));
    }
    if scores.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows for {} labels",
            scores.rows(),
            labels.len()
        )));
    }
    let mut hits = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        if margin(scores.row(i), y)? <= rho {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// `8 M (2M - 1) / rho`, the weight of the Rademacher term.
pub fn complexity_coefficient(classes: usize, rho: f64) -> f64 {
    let m = classes as f64;
    8.0 * m * (2.0 * m - 1.0) / rho
}

/// High-probability (1 - delta) upper bound on the generalization error:
///
/// ```text
/// emp + 8M(2M-1)/rho · R + sqrt(ln(log2(2/rho)) / m) + sqrt(ln(2/delta) / (2m))
/// ```
///
/// `rademacher` is any upper bound on the Rademacher average.
pub fn generalization_bound(
    emp_error: f64,
    rademacher: f64,
    classes: usize,
    rho: f64,
    m: usize,
    delta: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!(
            "margin coefficient must lie in (0, 1], got {rho}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0, 1), got {delta}"
        )));
    }
    if m == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    if classes < 2 {
        return Err(Error::Domain("at least two classes are required".into()));
    }
    let m = m as f64;
    let loglog = (2.0 / rho).log2().ln();
    Ok(emp_error
        + complexity_coefficient(classes, rho) * rademacher
        + (loglog / m).sqrt()
        + ((2.0 / delta).ln() / (2.0 * m)).sqrt())
}

/// Both sides of the strict inequality under which erasing a unit yields a
/// smaller generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErasureCondition {
    /// `E(f') - E(f)`: empirical margin error increase caused by erasure.
    pub lhs: f64,
    /// `8M(2M-1)/rho · (R̄(full) - R̄(erased))`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn erasure_condition(
    emp_full: f64,
    emp_erased: f64,
    classes: usize,
    rho: f64,
    rbar_full: f64,
    rbar_erased: f64,
) -> Result<ErasureCondition> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Domain(format!(
            "margin coefficient must be positive, got {rho}"
        )));
    }
    let lhs = emp_erased - emp_full;
    let rhs = complexity_coefficient(classes, rho) * (rbar_full - rbar_erased);
    Ok(ErasureCondition {
        lhs,
        rhs,
        holds: lhs < rhs,
    })
}
