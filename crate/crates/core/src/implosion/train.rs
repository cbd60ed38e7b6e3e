use serde::Serialize;

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::implosion::TrainingConfig;
use crate::numeric::{softmax_cross_entropy, Matrix2D, OptimizerState, Rng};
use crate::resnet::{FCResNetModel, TensorRole};

/// One row per training epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub round: usize,
    pub epoch: usize,
    pub remaining_units: usize,
    pub remaining_layers: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub lr: f64,
    pub macs: u64,
    pub params: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

const EVAL_CHUNK: usize = 1000;

fn check_compatible(model: &FCResNetModel, data: &DatasetSplit) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
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

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn correct(logits: &Matrix2D, labels: &[usize]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(logits.row(i)) == y)
        .count()
}

/// Mean loss and accuracy over the whole split.
pub fn evaluate(model: &FCResNetModel, data: &DatasetSplit) -> Result<Evaluation> {
    check_compatible(model, data)?;
    let mut hits = 0;
    let mut loss = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.batch(chunk);
        let logits = model.forward(&x)?;
        hits += correct(&logits, &y);
        loss += softmax_cross_entropy(&logits, &y)?.0 * chunk.len() as f64;
    }
    Ok(Evaluation {
        loss: loss / data.len() as f64,
        accuracy: hits as f64 / data.len() as f64,
    })
}

/// Logits for every row of the split, in order.
pub fn predict(model: &FCResNetModel, data: &DatasetSplit) -> Result<Matrix2D> {
    check_compatible(model, data)?;
    let mut out = Vec::with_capacity(data.len() * model.class_count());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, _) = data.batch(chunk);
        out.extend_from_slice(model.forward(&x)?.data());
    }
    Matrix2D::from_vec(data.len(), model.class_count(), out)
}

/// Mini-batch SGD with momentum over `cfg.epochs` shuffled epochs.
///
/// The shuffle stream is derived from `cfg.seed` and `round`, so each
/// retraining round sees a different but reproducible order. Optimizer
/// velocity starts at zero on every call.
pub fn train(
    model: &mut FCResNetModel,
    data: &DatasetSplit,
    val: Option<&DatasetSplit>,
    cfg: &TrainingConfig,
    round: usize,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    check_compatible(model, data)?;
    if let Some(v) = val {
        check_compatible(model, v)?;
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }

    let infos = model.tensor_infos();
    let shapes: Vec<_> = infos.iter().map(|i| i.shape).collect();
    let mask = infos
        .iter()
        .map(|i| i.role != TensorRole::Priority || cfg.decay_priorities)
        .collect();
    let mut opt = OptimizerState::new(
        &shapes,
        mask,
        cfg.momentum,
        cfg.learning_rate,
        cfg.weight_decay,
    )?;
    let mut rng = Rng::derive(cfg.seed, round as u64);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rows = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        opt.learning_rate = cfg.lr_at(epoch);
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hits = 0;
        for batch in order.chunks(cfg.batch_size) {
            let (x, y) = data.batch(batch);
            let (logits, cache) = model.forward_cached(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::Usage(format!(
                    "training diverged in round {round}, epoch {epoch} (loss {loss})"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            hits += correct(&logits, &y);
            let grads = model.backward(&cache, &grad)?;
            let g: Vec<&Matrix2D> = grads.tensors().iter().collect();
            opt.step(&mut model.tensors_mut(), &g)?;
        }
        let val_acc = val
            .map(|v| evaluate(model, v))
            .transpose()?
            .map(|e| e.accuracy);
        rows.push(MetricsRow {
            round,
            epoch,
            remaining_units: model.eligible_units().len(),
            remaining_layers: model.count_layers(),
            train_loss: loss_sum / data.len() as f64,
            train_acc: hits as f64 / data.len() as f64,
            val_acc,
            lr: opt.learning_rate,
            macs: model.count_macs(),
            params: model.count_params(),
        });
    }
    Ok(rows)
}
