use serde::Serialize;

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::implosion::train::{evaluate, train, MetricsRow};
use crate::implosion::{matched_budget, ImplosionConfig, TrainingConfig};
use crate::resnet::{FCResNetModel, StageSpec};

/// The `k` ids with the smallest priority, ascending by `(|w|, id)`.
pub fn select_lowest(priorities: &[(u32, f64)], k: usize) -> Result<Vec<u32>> {
    if k > priorities.len() {
        return Err(Error::Selection {
            requested: k,
            available: priorities.len(),
        });
    }
    let mut ranked: Vec<(u32, f64)> = priorities.iter().map(|&(id, w)| (id, w.abs())).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(k).map(|(id, _)| id).collect())
}

/// Eligible units with the `k` smallest `|w|`; ties go to the lower id.
pub fn select_topk(model: &FCResNetModel, k: usize) -> Result<Vec<u32>> {
    select_lowest(&model.priorities(), k)
}

/// One erase-and-retrain round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `(id, |w|)` of every eligible unit at the moment of selection.
    pub priorities: Vec<(u32, f64)>,
    pub erased: Vec<u32>,
    pub remaining_units: usize,
    pub remaining_layers: usize,
    pub val_acc: Option<f64>,
    pub macs: u64,
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplosionState {
    pub initial_units: usize,
    pub initial_layers: usize,
    pub initial_val_acc: Option<f64>,
    pub initial_macs: u64,
    pub initial_params: u64,
    pub rounds: Vec<RoundRecord>,
    pub metrics: Vec<MetricsRow>,
}

impl ImplosionState {
    /// Erased id sets `I_1, I_2, ...` in round order.
    pub fn erased_history(&self) -> Vec<Vec<u32>> {
        self.rounds.iter().map(|r| r.erased.clone()).collect()
    }

    pub fn final_val_acc(&self) -> Option<f64> {
        self.rounds
            .last()
            .map_or(self.initial_val_acc, |r| r.val_acc)
    }
}

/// Repeatedly erases the `k` lowest-priority units of an already trained
/// model and retrains from the initial learning rate, until at most
/// `target_remaining` eligible units are left.
pub fn run_implosion(
    model: &mut FCResNetModel,
    data: &DatasetSplit,
    val: Option<&DatasetSplit>,
    icfg: &ImplosionConfig,
) -> Result<ImplosionState> {
    run_implosion_with(model, data, val, icfg, |_, _| Ok(()))
}

/// [`run_implosion`] calling `after_round` with each finished round and the
/// retrained model; an error from the callback stops the loop.
pub fn run_implosion_with(
    model: &mut FCResNetModel,
    data: &DatasetSplit,
    val: Option<&DatasetSplit>,
    icfg: &ImplosionConfig,
    mut after_round: impl FnMut(&RoundRecord, &FCResNetModel) -> Result<()>,
) -> Result<ImplosionState> {
    icfg.validate_for(model.eligible_units().len())?;
    let initial_val_acc = val
        .map(|v| evaluate(model, v))
        .transpose()?
        .map(|e| e.accuracy);
    let mut state = ImplosionState {
        initial_units: model.eligible_units().len(),
        initial_layers: model.count_layers(),
        initial_val_acc,
        initial_macs: model.count_macs(),
        initial_params: model.count_params(),
        rounds: Vec::new(),
        metrics: Vec::new(),
    };
    let mut round = 0;
    while model.eligible_units().len() > icfg.target_remaining {
        round += 1;
        let priorities = model.priorities();
        let erased = select_lowest(&priorities, icfg.k)?;
        model.erase_units(&erased)?;
        let rows = train(model, data, val, &icfg.retrain, round)?;
        let val_acc = match rows.last() {
            Some(r) => r.val_acc,
            None => val
                .map(|v| evaluate(model, v))
                .transpose()?
                .map(|e| e.accuracy),
        };
        state.metrics.extend(rows);
        state.rounds.push(RoundRecord {
            round,
            priorities,
            erased,
            remaining_units: model.eligible_units().len(),
            remaining_layers: model.count_layers(),
            val_acc,
            macs: model.count_macs(),
            params: model.count_params(),
        });
        after_round(state.rounds.last().expect("just pushed"), model)?;
    }
    Ok(state)
}

/// Architecture of a scratch-trained comparison model.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSpec {
    pub stages: Vec<StageSpec>,
    pub class_count: usize,
    pub input_width: usize,
    pub input_bound: f64,
    pub model_seed: u64,
}

/// Fresh model trained for `budget_epochs` with the initial schedule
/// stretched to that length.
pub fn train_scratch_baseline(
    spec: &BaselineSpec,
    data: &DatasetSplit,
    val: Option<&DatasetSplit>,
    initial: &TrainingConfig,
    budget_epochs: usize,
) -> Result<(FCResNetModel, Vec<MetricsRow>)> {
    let cfg = initial.rescaled(budget_epochs);
    cfg.validate()?;
    let mut model = FCResNetModel::build(
        &spec.stages,
        spec.class_count,
        spec.input_width,
        spec.input_bound,
        spec.model_seed,
    )?;
    let rows = train(&mut model, data, val, &cfg, 0)?;
    Ok((model, rows))
}

/// Budget of a baseline compared against `state`.
pub fn baseline_budget(initial: &TrainingConfig, icfg: &ImplosionConfig, rounds: usize) -> usize {
    matched_budget(initial.epochs, rounds, icfg.retrain.epochs)
}

/// Spreads `weighted_units` over the stages of `template`, earlier stages
/// taking the remainder. Every stage keeps its transition unit.
pub fn stages_with_weighted_units(template: &[StageSpec], weighted_units: usize) -> Vec<StageSpec> {
    let n = template.len().max(1);
    template
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let share = weighted_units / n + usize::from(i < weighted_units % n);
            StageSpec {
                unit_count: 1 + share,
                ..*s
            }
        })
        .collect()
}
