//! Central-difference gradient checking.

/// Largest relative disagreement between `analytic` and the central
/// difference `(f(θ + h e_i) - f(θ - h e_i)) / 2h`, over all coordinates.
///
/// The relative error of one coordinate is `|a - n| / max(|a|, |n|, 1e-8)`;
/// the floor only matters when both values are (near) zero.
pub fn finite_diff_check<F>(mut loss: F, params: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    assert_eq!(params.len(), analytic.len());
    let mut theta = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let plus = loss(&theta);
        theta[i] = orig - h;
        let minus = loss(&theta);
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

pub const RELATIVE_FLOOR: f64 = 1e-8;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}
