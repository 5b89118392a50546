//! Adam training of the fitness model and per-run correlation scoring.

use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::MicroMacroModel;
use crate::datalog::{Dataset, Split};
use crate::error::{Error, Result};
use crate::io;
use crate::types::{rng_from_seed, TaskId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Stop after this many epochs without a better first-validation-set
    /// correlation; `None` trains for all epochs.
    pub patience: Option<usize>,
    pub min_delta: f64,
    /// Start the output bias at the mean training target.
    pub init_output_bias: bool,
}

impl TrainConfig {
    pub fn for_task(task: TaskId) -> Self {
        Self {
            learning_rate: if task == TaskId::C { 1e-6 } else { 1e-5 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: 200,
            batch_size: 256,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            patience: Some(20),
            min_delta: 1e-4,
            init_output_bias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-run correlation on each validation set, in the given order.
    pub validation_r: Vec<f64>,
    /// Mean minibatch training loss.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MicroMacroModel,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &MicroMacroModel) -> Self {
        Self {
            m_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MicroMacroModel, grads: &super::mlp::Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = cfg.learning_rate;
        let eps = cfg.adam_eps;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grads.weights[l])
                .for_each(update);
            Zip::from(&mut model.biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grads.biases[l])
                .for_each(update);
        }
    }
}

/// Minimizes mean squared error with Adam; scores every validation set after
/// each epoch. With `patience` set, training stops once the first validation
/// set's correlation plateaus and the best epoch's parameters are returned.
pub fn train(model: &MicroMacroModel, train: &Dataset, validation: &[&Dataset], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.iter().any(|v| v.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let mut model = model.clone();
    if cfg.init_output_bias {
        *model.output_bias_mut() = train.targets.iter().sum::<f64>() / train.len() as f64;
    }
    let mut adam = Adam::new(&model);
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::NEG_INFINITY, model.clone(), 0usize);
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = train.inputs.select(Axis(0), chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| train.targets[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&x, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss });
            }
            adam.step(&mut model, &grads, cfg);
            loss_sum += loss;
            batches += 1;
        }
        let validation_r = validation
            .iter()
            .map(|v| validate_correlation(&model, v).map(|r| r.mean))
            .collect::<Result<Vec<_>>>()?;
        let loss = loss_sum / batches as f64;
        history.push(EpochRecord {
            epoch,
            validation_r: validation_r.clone(),
            loss,
        });
        let score = validation_r.first().copied().unwrap_or(f64::NAN);
        if score.is_finite() && score > best.0 + cfg.min_delta {
            best = (score, model.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if let Some(p) = cfg.patience {
            if best.0.is_finite() && since_best >= p {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_score, best_model, best_epoch) = best;
    let (model, best_epoch) = if best_score.is_finite() && cfg.patience.is_some() {
        (best_model, best_epoch)
    } else {
        (model, history.len())
    };
    Ok(TrainOutcome {
        model,
        history,
        stopped_early,
        best_epoch,
    })
}

/// Pearson correlation; NaN when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let da = a[i] - ma;
        let db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Mean of the per-run correlations; NaN if every run was excluded.
    pub mean: f64,
    pub per_run: Vec<(usize, f64)>,
    /// Runs with fewer than two samples or constant true fitness.
    pub excluded: usize,
}

/// Per-run correlation between true and estimated fitness, averaged over
/// runs. A run whose estimate is constant while the truth varies scores 0.
pub fn validate_correlation(model: &MicroMacroModel, data: &Dataset) -> Result<CorrelationReport> {
    let pred = model.predict(&data.inputs)?;
    correlation_by_run(data, pred.as_slice().expect("contiguous"))
}

pub fn correlation_by_run(data: &Dataset, predictions: &[f64]) -> Result<CorrelationReport> {
    if predictions.len() != data.len() {
        return Err(Error::Shape(format!("{} predictions for {} samples", predictions.len(), data.len())));
    }
    let mut per_run = Vec::new();
    let mut excluded = 0;
    for (run, idx) in data.runs() {
        let truth: Vec<f64> = idx.iter().map(|&i| data.targets[i]).collect();
        let est: Vec<f64> = idx.iter().map(|&i| predictions[i]).collect();
        let truth_varies = truth.iter().any(|&v| v != truth[0]);
        if truth.len() < 2 || !truth_varies {
            excluded += 1;
            continue;
        }
        let r = pearson(&truth, &est);
        per_run.push((run, if r.is_nan() { 0.0 } else { r }));
    }
    let mean = if per_run.is_empty() {
        f64::NAN
    } else {
        per_run.iter().map(|(_, r)| r).sum::<f64>() / per_run.len() as f64
    };
    Ok(CorrelationReport { mean, per_run, excluded })
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Vs1 => "vs1",
        Split::Vs2 => "vs2",
        Split::Vs3 => "vs3",
    }
}

/// `epoch,<split>_r...,loss`; with the standard three sets the header is
/// `epoch,vs1_r,vs2_r,vs3_r,loss`.
pub fn write_history(path: &Path, splits: &[Split], history: &[EpochRecord]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    let mut header = vec!["epoch".to_string()];
    header.extend(splits.iter().map(|&s| format!("{}_r", split_name(s))));
    header.push("loss".into());
    w.write_record(&header)?;
    for h in history {
        let mut rec = vec![h.epoch.to_string()];
        rec.extend(h.validation_r.iter().map(|&r| io::fmt_f64(r)));
        rec.push(io::fmt_f64(h.loss));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
