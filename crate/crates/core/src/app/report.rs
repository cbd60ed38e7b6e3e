//! CSV and JSON artifacts with fixed headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::implosion::{ImplosionState, MetricsRow};
use crate::resnet::{
    FCResNetModel, HEAD_LAYERS, LAYERS_PER_TRANSITION_UNIT, LAYERS_PER_WEIGHTED_UNIT,
};

pub const METRICS_HEADER: &str =
    "round,epoch,remaining_units,remaining_layers,train_loss,train_acc,val_acc,lr,macs,params";
pub const CURVE_HEADER: &str = "method,remaining_layers,remaining_units,val_accuracy,macs,params";
pub const BOUNDS_HEADER: &str = "input_width,widths,input_bound,c,samples,classes,delta,rho,\
erase_index,paths,region_bound,region_bound_after_erasure,rademacher_bound,\
rademacher_bound_after_erasure,erasure_tightens,empirical_margin_error,\
empirical_margin_error_erased,generalization_bound,generalization_bound_erased,\
condition_lhs,condition_rhs,condition_holds";

/// Leading comment of every curve file, declaring how depth is counted.
pub fn layer_convention_comment() -> String {
    format!(
        "# layers: weighted unit = {LAYERS_PER_WEIGHTED_UNIT}, transition unit = \
         {LAYERS_PER_TRANSITION_UNIT}, head = {HEAD_LAYERS}; remaining_units counts weighted units"
    )
}

/// One point of an accuracy-versus-depth curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: String,
    pub remaining_layers: usize,
    pub remaining_units: usize,
    pub val_accuracy: Option<f64>,
    pub macs: u64,
    pub params: u64,
}

impl CurvePoint {
    pub fn of_model(method: &str, model: &FCResNetModel, val_accuracy: Option<f64>) -> Self {
        Self {
            method: method.to_owned(),
            remaining_layers: model.count_layers(),
            remaining_units: model.eligible_units().len(),
            val_accuracy,
            macs: model.count_macs(),
            params: model.count_params(),
        }
    }
}

/// The initial model followed by one point per round.
pub fn implosion_curve(state: &ImplosionState) -> Vec<CurvePoint> {
    let initial = CurvePoint {
        method: "implosion".into(),
        remaining_layers: state.initial_layers,
        remaining_units: state.initial_units,
        val_accuracy: state.initial_val_acc,
        macs: state.initial_macs,
        params: state.initial_params,
    };
    std::iter::once(initial)
        .chain(state.rounds.iter().map(|r| CurvePoint {
            method: "implosion".into(),
            remaining_layers: r.remaining_layers,
            remaining_units: r.remaining_units,
            val_accuracy: r.val_acc,
            macs: r.macs,
            params: r.params,
        }))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_rows<T: Serialize>(
    path: &Path,
    preamble: Option<&str>,
    header: &str,
    rows: &[T],
) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut out = create(path)?;
    if let Some(p) = preamble {
        writeln!(out, "{p}").map_err(io)?;
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.into_inner()
        .map_err(|e| io(e.into_error()))?
        .flush()
        .map_err(io)
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_rows(path, None, METRICS_HEADER, rows)
}

pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    write_rows(
        path,
        Some(&layer_convention_comment()),
        CURVE_HEADER,
        points,
    )
}

#[derive(Serialize)]
struct BoundsRow {
    input_width: usize,
    widths: String,
    input_bound: f64,
    c: f64,
    samples: usize,
    classes: usize,
    delta: f64,
    rho: f64,
    erase_index: usize,
    paths: String,
    region_bound: String,
    region_bound_after_erasure: String,
    rademacher_bound: f64,
    rademacher_bound_after_erasure: f64,
    erasure_tightens: bool,
    empirical_margin_error: f64,
    empirical_margin_error_erased: f64,
    generalization_bound: f64,
    generalization_bound_erased: f64,
    condition_lhs: f64,
    condition_rhs: f64,
    condition_holds: bool,
}

/// Single-row CSV; widths are `;`-separated and absent region bounds empty.
pub fn write_bounds_csv(path: &Path, r: &BoundReport) -> Result<()> {
    let s = &r.signature;
    let opt = |v: &Option<num_bigint::BigUint>| v.as_ref().map_or(String::new(), |b| b.to_string());
    let row = BoundsRow {
        input_width: s.input_width,
        widths: s
            .widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        input_bound: s.input_bound,
        c: s.c,
        samples: s.samples,
        classes: s.classes,
        delta: s.delta,
        rho: s.rho,
        erase_index: r.erase_index,
        paths: r.paths.to_string(),
        region_bound: opt(&r.region_bound),
        region_bound_after_erasure: opt(&r.region_bound_after_erasure),
        rademacher_bound: r.rademacher_bound,
        rademacher_bound_after_erasure: r.rademacher_bound_after_erasure,
        erasure_tightens: r.erasure_tightens,
        empirical_margin_error: r.empirical_margin_error,
        empirical_margin_error_erased: r.empirical_margin_error_erased,
        generalization_bound: r.generalization_bound,
        generalization_bound_erased: r.generalization_bound_erased,
        condition_lhs: r.erasure_condition.lhs,
        condition_rhs: r.erasure_condition.rhs,
        condition_holds: r.erasure_condition.holds,
    };
    write_rows(path, None, BOUNDS_HEADER, &[row])
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io(e.into()))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}
