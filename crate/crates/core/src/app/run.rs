//! Subcommand bodies. Each one validates everything and loads its inputs
//! before creating the output directory.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::app::checkpoint::{load_checkpoint, save_checkpoint_tagged};
use crate::app::config::RunConfig;
use crate::app::report::{
    implosion_curve, write_bounds_csv, write_curve_csv, write_json, write_metrics_csv, CurvePoint,
};
use crate::bounds::{empirical_margin_error, ArchitectureSignature, BoundInputs, BoundReport};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::implosion::{
    evaluate, predict, run_implosion_with, select_topk, stages_with_weighted_units, train,
    train_scratch_baseline, BaselineSpec, Evaluation, ImplosionState, MetricsRow, RoundRecord,
};
use crate::numeric::softmax;
use crate::resnet::{
    FCResNetModel, UnitKind, LAYERS_PER_TRANSITION_UNIT, LAYERS_PER_WEIGHTED_UNIT,
};

pub const LOCK_FILE: &str = ".nimp.lock";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const BASELINE_CURVE_FILE: &str = "baseline_curve.csv";
pub const BASELINE_METRICS_FILE: &str = "baseline_metrics.csv";
pub const ROUNDS_FILE: &str = "rounds.json";
pub const MODEL_FILE: &str = "model.nimp";
pub const INITIAL_FILE: &str = "initial.nimp";
pub const BOUNDS_CSV_FILE: &str = "bounds.csv";
pub const BOUNDS_JSON_FILE: &str = "bounds.json";
pub const CONFIG_FILE: &str = "config.json";

pub fn round_checkpoint_name(round: usize) -> String {
    format!("round-{round:03}.nimp")
}

pub fn baseline_checkpoint_name(units: usize) -> String {
    format!("baseline-{units:03}.nimp")
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    dir: PathBuf,
    path: PathBuf,
}

impl OutputLock {
    /// Creates `dir` if needed and claims it.
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self {
                dir: dir.to_owned(),
                path,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Usage(format!(
                "{} is in use by another run (delete {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn check_inputs(model: &FCResNetModel, data: &DatasetSplit) -> Result<()> {
    if data.width() != model.input_width() {
        return Err(Error::Data(format!(
            "dataset width {} does not match model input width {}",
            data.width(),
            model.input_width()
        )));
    }
    if data.classes() > model.class_count() {
        return Err(Error::Data(format!(
            "dataset has {} classes, model predicts {}",
            data.classes(),
            model.class_count()
        )));
    }
    Ok(())
}

fn build_model(cfg: &RunConfig) -> Result<FCResNetModel> {
    let a = &cfg.architecture;
    FCResNetModel::build(&a.stages, a.classes, a.input_width, a.input_bound, cfg.seed)
}

fn write_config(lock: &OutputLock, cfg: &RunConfig) -> Result<()> {
    let path = lock.file(CONFIG_FILE);
    fs::write(&path, cfg.to_json() + "\n").map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub val: Evaluation,
    pub checkpoint: PathBuf,
    pub metrics: Vec<MetricsRow>,
}

/// Trains a fresh model; writes `model.nimp`, `metrics.csv`, `config.json`.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, val) = cfg.dataset.load()?;
    let mut model = build_model(cfg)?;
    check_inputs(&model, &train_set)?;
    check_inputs(&model, &val)?;

    let lock = OutputLock::acquire(&cfg.out_dir)?;
    write_config(&lock, cfg)?;
    let metrics = train(&mut model, &train_set, Some(&val), &cfg.training, 0)?;
    let checkpoint = lock.file(MODEL_FILE);
    save_checkpoint_tagged(&model, &cfg.digest(), &checkpoint)?;
    write_metrics_csv(&lock.file(METRICS_FILE), &metrics)?;
    Ok(TrainOutcome {
        val: evaluate(&model, &val)?,
        checkpoint,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplodeOutcome {
    pub state: ImplosionState,
    pub curve: Vec<CurvePoint>,
    /// Rows of the initial training (empty when starting from a checkpoint)
    /// followed by every retraining epoch.
    pub metrics: Vec<MetricsRow>,
    pub model: FCResNetModel,
}

/// Trains (or loads, with `from`) the initial model and implodes it.
///
/// Writes `initial.nimp`, one `round-NNN.nimp` per round, `metrics.csv`,
/// `curve.csv`, `rounds.json` and `config.json`.
pub fn run_implode(cfg: &RunConfig, from: Option<&Path>) -> Result<ImplodeOutcome> {
    cfg.validate()?;
    let (train_set, val) = cfg.dataset.load()?;
    let mut model = match from {
        Some(p) => load_checkpoint(p)?,
        None => build_model(cfg)?,
    };
    check_inputs(&model, &train_set)?;
    check_inputs(&model, &val)?;
    cfg.implosion
        .validate_for(model.eligible_units().len())
        .map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("checkpoint: {m}")),
            other => other,
        })?;

    let lock = OutputLock::acquire(&cfg.out_dir)?;
    write_config(&lock, cfg)?;
    let digest = cfg.digest();
    let mut metrics = match from {
        Some(_) => Vec::new(),
        None => train(&mut model, &train_set, Some(&val), &cfg.training, 0)?,
    };
    save_checkpoint_tagged(&model, &digest, &lock.file(INITIAL_FILE))?;
    let state = run_implosion_with(
        &mut model,
        &train_set,
        Some(&val),
        &cfg.implosion,
        |r: &RoundRecord, m: &FCResNetModel| {
            save_checkpoint_tagged(m, &digest, &lock.file(&round_checkpoint_name(r.round)))
        },
    )?;
    metrics.extend(state.metrics.iter().cloned());
    let curve = implosion_curve(&state);
    write_metrics_csv(&lock.file(METRICS_FILE), &metrics)?;
    write_curve_csv(&lock.file(CURVE_FILE), &curve)?;
    write_json(&lock.file(ROUNDS_FILE), &state.rounds)?;
    Ok(ImplodeOutcome {
        state,
        curve,
        metrics,
        model,
    })
}

/// Weighted-unit counts the implosion schedule of `cfg` passes through
/// after the initial model, deepest first.
pub fn implosion_depths(cfg: &RunConfig) -> Vec<usize> {
    let start = cfg.architecture.weighted_units();
    let rounds = cfg.implosion.rounds_from(start);
    (1..=rounds)
        .map(|r| start.saturating_sub(r * cfg.implosion.k))
        .collect()
}

/// Epochs an implosion run spends to reach `units` weighted units.
pub fn matched_epochs(cfg: &RunConfig, units: usize) -> usize {
    let start = cfg.architecture.weighted_units();
    let rounds = start.saturating_sub(units).div_ceil(cfg.implosion.k.max(1));
    cfg.training.epochs + rounds * cfg.implosion.retrain.epochs
}

/// Trains one scratch model per depth with the epoch budget the implosion
/// schedule spends to reach that depth. Weighted units are spread over the
/// stages, earlier stages taking the remainder.
///
/// `depths` overrides the config list; both default to
/// [`implosion_depths`]. Writes `baseline-NNN.nimp` per depth,
/// `baseline_curve.csv`, `baseline_metrics.csv` and `config.json`.
pub fn run_baseline(cfg: &RunConfig, depths: Option<&[usize]>) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let mut depths: Vec<usize> = match depths {
        Some(d) => d.to_vec(),
        None if !cfg.baseline.depths.is_empty() => cfg.baseline.depths.clone(),
        None => implosion_depths(cfg),
    };
    let eligible = cfg.architecture.weighted_units();
    if let Some(&d) = depths.iter().find(|&&d| d > eligible) {
        return Err(Error::Config(format!(
            "baseline depth {d} exceeds the {eligible} weighted units of the architecture"
        )));
    }
    depths.sort_unstable_by(|a, b| b.cmp(a));
    depths.dedup();
    if depths.is_empty() {
        return Err(Error::Config("no baseline depths to train".into()));
    }
    let (train_set, val) = cfg.dataset.load()?;
    check_inputs(&build_model(cfg)?, &train_set)?;
    check_inputs(&build_model(cfg)?, &val)?;

    let lock = OutputLock::acquire(&cfg.out_dir)?;
    write_config(&lock, cfg)?;
    let a = &cfg.architecture;
    let mut curve = Vec::new();
    let mut metrics = Vec::new();
    for &units in &depths {
        let spec = BaselineSpec {
            stages: stages_with_weighted_units(&a.stages, units),
            class_count: a.classes,
            input_width: a.input_width,
            input_bound: a.input_bound,
            model_seed: cfg.seed,
        };
        let budget = matched_epochs(cfg, units);
        let (model, rows) =
            train_scratch_baseline(&spec, &train_set, Some(&val), &cfg.training, budget)?;
        let acc = evaluate(&model, &val)?.accuracy;
        save_checkpoint_tagged(
            &model,
            &cfg.digest(),
            &lock.file(&baseline_checkpoint_name(units)),
        )?;
        curve.push(CurvePoint::of_model("baseline", &model, Some(acc)));
        metrics.extend(rows);
    }
    write_curve_csv(&lock.file(BASELINE_CURVE_FILE), &curve)?;
    write_metrics_csv(&lock.file(BASELINE_METRICS_FILE), &metrics)?;
    Ok(curve)
}

/// Raw bound evaluation request, the JSON accepted by `bounds --signature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsRequest {
    pub signature: ArchitectureSignature,
    /// One per width; all 1 when absent.
    #[serde(default)]
    pub factors: Option<Vec<f64>>,
    #[serde(default)]
    pub emp_error: f64,
    #[serde(default)]
    pub emp_error_erased: f64,
    #[serde(default = "default_erase_index")]
    pub erase_index: usize,
}

fn default_erase_index() -> usize {
    1
}

impl BoundsRequest {
    pub fn inputs(&self) -> Result<BoundInputs> {
        let factors = self
            .factors
            .clone()
            .unwrap_or_else(|| vec![1.0; self.signature.widths.len()]);
        let inputs = BoundInputs {
            signature: self.signature.clone(),
            factors,
            emp_error: self.emp_error,
            emp_error_erased: self.emp_error_erased,
            erase_index: self.erase_index,
        };
        // Surface domain problems as config errors before anything runs.
        BoundReport::evaluate(&inputs).map_err(|e| Error::Config(e.to_string()))?;
        Ok(inputs)
    }
}

/// Margin-bound constants used when evaluating a trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSettings {
    pub rho: f64,
    pub delta: f64,
    pub c: f64,
}

/// Class probabilities of every sample.
fn probabilities(model: &FCResNetModel, data: &DatasetSplit) -> Result<crate::numeric::Matrix2D> {
    Ok(softmax(&predict(model, data)?))
}

/// Bound inputs for a trained model evaluated on `data`.
///
/// Each residual unit is one layer of width equal to its hidden width, with
/// factor from [`FCResNetModel::layer_l1_bounds`]. Margins are taken on
/// softmax probabilities. `erase_index` (1-based, forward order) must name a
/// weighted unit; by default it is the unit the next implosion round would
/// erase.
pub fn model_bound_inputs(
    model: &FCResNetModel,
    data: &DatasetSplit,
    settings: MarginSettings,
    erase_index: Option<usize>,
) -> Result<BoundInputs> {
    check_inputs(model, data)?;
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    if data.max_abs() > model.input_bound() {
        return Err(Error::Data(format!(
            "features reach {} but the model's input bound is {}",
            data.max_abs(),
            model.input_bound()
        )));
    }
    let position = |id: u32| {
        model
            .units()
            .iter()
            .position(|u| u.id() == id)
            .map(|p| p + 1)
    };
    let l = match erase_index {
        Some(l) => {
            let unit = l
                .checked_sub(1)
                .and_then(|i| model.units().get(i))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "erase index {l} outside 1..={}",
                        model.units().len()
                    ))
                })?;
            if unit.kind() != UnitKind::Weighted {
                return Err(Error::Config(format!("unit at index {l} is not erasable")));
            }
            l
        }
        None => {
            let id = select_topk(model, 1)
                .map_err(|_| Error::Usage("model has no erasable units".into()))?[0];
            position(id).expect("selected unit exists")
        }
    };
    let erased_id = model.units()[l - 1].id();
    let signature = ArchitectureSignature {
        input_width: model.input_width(),
        widths: model.units().iter().map(|u| u.hidden_width()).collect(),
        input_bound: model.input_bound(),
        c: settings.c,
        samples: data.len(),
        classes: model.class_count(),
        delta: settings.delta,
        rho: settings.rho,
    };
    let emp_error =
        empirical_margin_error(&probabilities(model, data)?, data.labels(), settings.rho)?;
    let mut erased = model.clone();
    erased.erase_units(&[erased_id])?;
    let emp_error_erased =
        empirical_margin_error(&probabilities(&erased, data)?, data.labels(), settings.rho)?;
    Ok(BoundInputs {
        signature,
        factors: model.layer_l1_bounds().factors(),
        emp_error,
        emp_error_erased,
        erase_index: l,
    })
}

/// Evaluates the report and, with `out`, writes `bounds.csv` and
/// `bounds.json` there.
pub fn run_bounds(inputs: &BoundInputs, out: Option<&Path>) -> Result<BoundReport> {
    let report = BoundReport::evaluate(inputs)?;
    if let Some(dir) = out {
        let lock = OutputLock::acquire(dir)?;
        write_bounds_csv(&lock.file(BOUNDS_CSV_FILE), &report)?;
        write_json(&lock.file(BOUNDS_JSON_FILE), &report)?;
    }
    Ok(report)
}

pub fn run_eval(model: &FCResNetModel, data: &DatasetSplit) -> Result<Evaluation> {
    check_inputs(model, data)?;
    evaluate(model, data)
}

/// Plain-text accounting table: one row per unit, then totals.
pub fn inspect_table(model: &FCResNetModel, val: Option<&Evaluation>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>5} {:<10} {:>12} {:>10} {:>10} {:>6}",
        "unit", "stage", "kind", "|w|", "macs", "params", "layers"
    );
    for u in model.units() {
        let (kind, w, layers) = match u.kind() {
            UnitKind::Transition => ("transition", "-".to_string(), LAYERS_PER_TRANSITION_UNIT),
            UnitKind::Weighted => (
                "weighted",
                format!("{:.6}", u.priority().unwrap_or(0.0).abs()),
                LAYERS_PER_WEIGHTED_UNIT,
            ),
        };
        let _ = writeln!(
            s,
            "{:>5} {:>5} {:<10} {:>12} {:>10} {:>10} {:>6}",
            u.id(),
            u.stage(),
            kind,
            w,
            u.macs(),
            u.param_count(),
            layers
        );
    }
    let _ = writeln!(s, "weighted units: {}", model.eligible_units().len());
    let _ = writeln!(s, "layers: {}", model.count_layers());
    let _ = writeln!(s, "macs: {}", model.count_macs());
    let _ = writeln!(s, "params: {}", model.count_params());
    if let Some(e) = val {
        let _ = writeln!(s, "val accuracy: {}", e.accuracy);
        let _ = writeln!(s, "val loss: {}", e.loss);
    }
    s
}
