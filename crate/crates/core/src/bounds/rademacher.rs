//! Closed-form upper bounds on the Rademacher average of the classifier
//! class: `c · N · sqrt(ln n0 / m) · ∏ Ŵ_l`.

use crate::error::{Error, Result};

fn check(c: f64, input_bound: f64, n0: usize, m: usize, factors: &[f64]) -> Result<()> {
    if n0 < 2 {
        return Err(Error::Domain(format!(
            "input width {n0} makes ln n0 nonpositive; need n0 >= 2"
        )));
    }
    if m == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    if !(c > 0.0 && c.is_finite()) || !(input_bound > 0.0 && input_bound.is_finite()) {
        return Err(Error::Domain("c and N must be positive and finite".into()));
    }
    if let Some(f) = factors.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::Domain(format!(
            "factor {f} is not a nonnegative number"
        )));
    }
    Ok(())
}

fn scale(c: f64, input_bound: f64, n0: usize, m: usize) -> f64 {
    c * input_bound * ((n0 as f64).ln() / m as f64).sqrt()
}

pub fn rademacher_bound(
    c: f64,
    input_bound: f64,
    n0: usize,
    m: usize,
    factors: &[f64],
) -> Result<f64> {
    check(c, input_bound, n0, m, factors)?;
    Ok(scale(c, input_bound, n0, m) * factors.iter().product::<f64>())
}

fn check_index(factors: &[f64], erased: usize) -> Result<()> {
    if erased == 0 || erased > factors.len() {
        return Err(Error::Domain(format!(
            "erased index {erased} outside 1..={}",
            factors.len()
        )));
    }
    Ok(())
}

/// Bound with factor `erased` (1-based) left out of the product.
pub fn rademacher_bound_after_erasure(
    c: f64,
    input_bound: f64,
    n0: usize,
    m: usize,
    factors: &[f64],
    erased: usize,
) -> Result<f64> {
    check(c, input_bound, n0, m, factors)?;
    check_index(factors, erased)?;
    let product: f64 = factors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i + 1 != erased)
        .map(|(_, f)| f)
        .product();
    Ok(scale(c, input_bound, n0, m) * product)
}

/// Whether erasing unit `erased` (1-based) strictly lowers the bound, which
/// happens exactly when its factor exceeds one.
pub fn erasure_tightens(factors: &[f64], erased: usize) -> Result<bool> {
    check_index(factors, erased)?;
    Ok(factors[erased - 1] > 1.0)
}
