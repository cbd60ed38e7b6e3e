use num_bigint::BigUint;
use serde::{Deserialize, Serialize, Serializer};

use crate::bounds::margin::{erasure_condition, generalization_bound, ErasureCondition};
use crate::bounds::rademacher::{
    erasure_tightens, rademacher_bound, rademacher_bound_after_erasure,
};
use crate::bounds::regions::{count_paths, region_bound, region_bound_after_erasure};
use crate::error::{Error, Result};

/// Architecture and sample quantities the bounds are evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSignature {
    /// `n0`
    pub input_width: usize,
    /// `n_1 .. n_L`
    pub widths: Vec<usize>,
    /// `N`: inputs lie in `[-N, N]^n0`.
    pub input_bound: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// `m`, also used as the empirical sample size.
    pub samples: usize,
    pub classes: usize,
    pub delta: f64,
    pub rho: f64,
}

fn default_c() -> f64 {
    1.0
}

impl ArchitectureSignature {
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Whether every width is at least the input width.
    pub fn widths_dominate_input(&self) -> bool {
        self.widths.iter().all(|&w| w >= self.input_width)
    }

    /// Checks everything except the width condition, which only the region
    /// bounds need.
    pub fn validate_common(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Domain("signature needs at least one layer".into()));
        }
        if self.input_width == 0 {
            return Err(Error::Domain("input width must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        if self.classes < 2 {
            return Err(Error::Domain("at least two classes are required".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Domain(format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.input_bound > 0.0 && self.input_bound.is_finite()) {
            return Err(Error::Domain("N must be positive".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Domain("c must be positive".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if !self.widths_dominate_input() {
            return Err(Error::Domain(format!(
                "every width must be at least n0 = {}",
                self.input_width
            )));
        }
        Ok(())
    }
}

/// Everything needed to fill a [`BoundReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub signature: ArchitectureSignature,
    /// `Ŵ_1 .. Ŵ_L`, one per width.
    pub factors: Vec<f64>,
    /// Empirical margin error of the full classifier `f`.
    pub emp_error: f64,
    /// Empirical margin error of `f'`, the classifier with unit
    /// `erase_index` removed.
    pub emp_error_erased: f64,
    /// 1-based index `l'` of the erased unit.
    pub erase_index: usize,
}

fn big_as_string<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn opt_big_as_string<S: Serializer>(
    v: &Option<BigUint>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(b) => s.serialize_str(&b.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub signature: ArchitectureSignature,
    pub factors: Vec<f64>,
    pub erase_index: usize,
    #[serde(serialize_with = "big_as_string")]
    pub paths: BigUint,
    /// Absent when some width is below `n0`.
    #[serde(serialize_with = "opt_big_as_string")]
    pub region_bound: Option<BigUint>,
    /// Absent when some width is below `n0` or the erased unit is the last.
    #[serde(serialize_with = "opt_big_as_string")]
    pub region_bound_after_erasure: Option<BigUint>,
    pub rademacher_bound: f64,
    pub rademacher_bound_after_erasure: f64,
    pub erasure_tightens: bool,
    pub empirical_margin_error: f64,
    pub empirical_margin_error_erased: f64,
    pub generalization_bound: f64,
    pub generalization_bound_erased: f64,
    pub erasure_condition: ErasureCondition,
    /// Logarithm convention of the reported values.
    pub log_convention: &'static str,
}

pub const LOG_CONVENTION: &str = "natural log except the inner log2(2/rho)";

impl BoundReport {
    pub fn evaluate(inputs: &BoundInputs) -> Result<Self> {
        let sig = &inputs.signature;
        sig.validate_common()?;
        if inputs.factors.len() != sig.depth() {
            return Err(Error::Domain(format!(
                "{} factors for {} layers",
                inputs.factors.len(),
                sig.depth()
            )));
        }
        for e in [inputs.emp_error, inputs.emp_error_erased] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Domain(format!("empirical error {e} outside [0, 1]")));
            }
        }
        let l = inputs.erase_index;
        let (region, region_erased) = if sig.widths_dominate_input() {
            let full = region_bound(sig.input_width, &sig.widths)?;
            let erased = (l >= 1 && l < sig.depth())
                .then(|| region_bound_after_erasure(sig.input_width, &sig.widths, l))
                .transpose()?;
            (Some(full), erased)
        } else {
            (None, None)
        };
        let (c, n, n0, m) = (sig.c, sig.input_bound, sig.input_width, sig.samples);
        let rad = rademacher_bound(c, n, n0, m, &inputs.factors)?;
        let rad_erased = rademacher_bound_after_erasure(c, n, n0, m, &inputs.factors, l)?;
        let gen = generalization_bound(inputs.emp_error, rad, sig.classes, sig.rho, m, sig.delta)?;
        let gen_erased = generalization_bound(
            inputs.emp_error_erased,
            rad_erased,
            sig.classes,
            sig.rho,
            m,
            sig.delta,
        )?;
        let erasure_condition = erasure_condition(
            inputs.emp_error,
            inputs.emp_error_erased,
            sig.classes,
            sig.rho,
            rad,
            rad_erased,
        )?;
        Ok(Self {
            signature: sig.clone(),
            factors: inputs.factors.clone(),
            erase_index: l,
            paths: count_paths(sig.depth() as u32),
            region_bound: region,
            region_bound_after_erasure: region_erased,
            rademacher_bound: rad,
            rademacher_bound_after_erasure: rad_erased,
            erasure_tightens: erasure_tightens(&inputs.factors, l)?,
            empirical_margin_error: inputs.emp_error,
            empirical_margin_error_erased: inputs.emp_error_erased,
            generalization_bound: gen,
            generalization_bound_erased: gen_erased,
            erasure_condition,
            log_convention: LOG_CONVENTION,
        })
    }
}
