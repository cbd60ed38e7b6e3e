//! Lower bounds on the number of linear regions of a fully-connected ResNet.
//!
//! For input width `n0` and unit widths `n_1..n_L` the bound is
//!
//! ```text
//! (∏_{i=1}^{L-1} ⌊n_i / n0⌋^n0) · Σ_{j=0}^{n0} C(n_L, j)
//! ```
//!
//! evaluated exactly with arbitrary-precision integers.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Number of input-to-output paths through `depth` residual units: `2^depth`.
pub fn count_paths(depth: u32) -> BigUint {
    BigUint::one() << depth
}

/// `Σ_{j=0}^{k} C(n, j)`, from rows of Pascal's triangle truncated at
/// column `k`.
pub fn binomial_prefix_sum(n: usize, k: usize) -> BigUint {
    let cols = k.min(n) + 1;
    let mut row: Vec<BigUint> = vec![BigUint::zero(); cols];
    row[0] = BigUint::one();
    for i in 1..=n {
        for j in (1..cols.min(i + 1)).rev() {
            let left = row[j - 1].clone();
            row[j] += left;
        }
    }
    row.into_iter().fold(BigUint::zero(), |acc, v| acc + v)
}

fn check_widths(n0: usize, widths: &[usize]) -> Result<()> {
    if n0 == 0 {
        return Err(Error::Domain("input width must be positive".into()));
    }
    if widths.is_empty() {
        return Err(Error::Domain("at least one layer width is required".into()));
    }
    if let Some((i, w)) = widths.iter().enumerate().find(|(_, &w)| w < n0) {
        return Err(Error::Domain(format!(
            "layer {} has width {w} below the input width {n0}",
            i + 1
        )));
    }
    Ok(())
}

fn region_bound_skipping(n0: usize, widths: &[usize], skip: Option<usize>) -> BigUint {
    let last = widths.len() - 1;
    let mut product = BigUint::one();
    for (i, &w) in widths[..last].iter().enumerate() {
        if skip == Some(i + 1) {
            continue;
        }
        product *= BigUint::from(w / n0).pow(n0 as u32);
    }
    product * binomial_prefix_sum(widths[last], n0)
}

pub fn region_bound(n0: usize, widths: &[usize]) -> Result<BigUint> {
    check_widths(n0, widths)?;
    Ok(region_bound_skipping(n0, widths, None))
}

/// The region bound with the factor of unit `erased` (1-based,
/// `1 <= erased < L`) removed from the product.
pub fn region_bound_after_erasure(n0: usize, widths: &[usize], erased: usize) -> Result<BigUint> {
    check_widths(n0, widths)?;
    if erased == 0 || erased >= widths.len() {
        return Err(Error::Domain(format!(
            "erased index {erased} must satisfy 1 <= l' < L = {}",
            widths.len()
        )));
    }
    Ok(region_bound_skipping(n0, widths, Some(erased)))
}
