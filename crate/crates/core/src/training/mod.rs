//! Loss, gradients, optimizer and the epoch loops.

mod adam;
mod backward;
mod loss;

pub use adam::{adam_update, Moments, OptimizerState, BETA1, BETA2, EPSILON};
pub use backward::{backward, backward_sample, surrogate_grad, GradientSet};
pub use loss::{loss, one_hot};

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datasets::{sample_seed, SpikeSource};
use crate::error::{Error, Result};
use crate::network::{forward_sample, NetworkModel, SpikeMode, SpikeRaster};

pub const DEFAULT_V_WINDOW: f64 = 0.25;
pub const DEFAULT_LR_DECAY: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_w: f64,
    pub lr_d: f64,
    pub lr_decay: f64,
    pub v_window: f64,
    /// Samples per parallel gradient chunk. Chunk boundaries, not the
    /// thread count, fix the summation order.
    pub chunk_size: usize,
    /// Measure wall time per epoch. Off by default so records are
    /// reproducible byte for byte.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            epochs: 20,
            lr_w: 1e-3,
            lr_d: 1e-3,
            lr_decay: DEFAULT_LR_DECAY,
            v_window: DEFAULT_V_WINDOW,
            chunk_size: 25,
            record_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.chunk_size == 0 {
            return Err(Error::Config("batch and chunk sizes must be positive".into()));
        }
        if !(self.lr_w >= 0.0 && self.lr_d >= 0.0 && self.lr_decay > 0.0) {
            return Err(Error::Config("learning rates must be non-negative and decay positive".into()));
        }
        if self.v_window.is_nan() || self.v_window < 0.0 {
            return Err(Error::Config(format!("v_window must be non-negative, got {}", self.v_window)));
        }
        Ok(())
    }
}

/// One row of a training log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Percent.
    pub test_acc: f64,
    pub lr: f64,
    pub seconds: f64,
    pub seed: u64,
    pub config_hash: String,
}

pub fn write_records_csv<W: Write>(records: &[TrainRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "test_acc", "lr", "seconds"])?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.test_acc.to_string(),
            r.lr.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sample loss of `model` on one input under `mode`, with no gradient.
pub fn sample_loss(model: &NetworkModel, input: &SpikeRaster, target: &[f64], mode: SpikeMode) -> Result<f64> {
    let rates = forward_sample(model, input, mode)?.output_rates();
    loss(&[rates], &[target.to_vec()])
}

fn check_source(model: &NetworkModel, data: &dyn SpikeSource) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    if data.neurons() != model.sizes.input || data.classes() > model.sizes.output {
        return Err(Error::Shape(format!(
            "dataset with {} channels and {} classes does not fit a {}-{}-{} network",
            data.neurons(),
            data.classes(),
            model.sizes.input,
            model.sizes.hidden,
            model.sizes.output
        )));
    }
    Ok(())
}

/// Gradient of the mean loss over `indices`, summed chunk by chunk in index
/// order. Returns the gradient and the summed per-sample loss.
fn batch_gradient(
    model: &NetworkModel,
    data: &dyn SpikeSource,
    indices: &[usize],
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<(GradientSet, f64)> {
    let scale = 1.0 / indices.len() as f64;
    let outputs = model.sizes.output;
    let parts: Vec<(GradientSet, f64)> = indices
        .par_chunks(cfg.chunk_size)
        .map(|chunk| {
            let mut g = GradientSet::zeros(model);
            let mut total = 0.0;
            for &i in chunk {
                let cache = forward_sample(model, &data.raster(i, epoch), SpikeMode::Hard)?;
                let target = one_hot(data.label(i), outputs);
                total += backward_sample(model, &cache, &target, scale, cfg.v_window, &mut g)?;
            }
            Ok((g, total))
        })
        .collect::<Result<_>>()?;
    let mut iter = parts.into_iter();
    let (mut grads, mut total) = iter.next().expect("batch is non-empty");
    for (g, l) in iter {
        grads.add_assign(&g);
        total += l;
    }
    Ok((grads, total))
}

/// One pass over `data` in a seeded random order. Returns the mean
/// training loss.
pub fn train_epoch(
    model: &mut NetworkModel,
    data: &dyn SpikeSource,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
    epoch: usize,
    seed: u64,
) -> Result<f64> {
    cfg.validate()?;
    check_source(model, data)?;
    opt.set_epoch(epoch);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(sample_seed(seed, epoch, usize::MAX)));
    let mut total = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let (grads, l) = batch_gradient(model, data, batch, epoch, cfg)?;
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient { step: opt.step as usize });
        }
        opt.apply(model, &grads)?;
        total += l;
    }
    Ok(total / data.len() as f64)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Predicted class of every sample.
pub fn predict(model: &NetworkModel, data: &dyn SpikeSource) -> Result<Vec<usize>> {
    check_source(model, data)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| Ok(argmax(&forward_sample(model, &data.raster(i, 0), SpikeMode::Hard)?.output_rates())))
        .collect()
}

/// Percent of samples whose highest-rate output neuron matches the label.
pub fn evaluate(model: &NetworkModel, data: &dyn SpikeSource) -> Result<f64> {
    let pred = predict(model, data)?;
    let correct = pred.iter().enumerate().filter(|&(i, &p)| p == data.label(i)).count();
    Ok(100.0 * correct as f64 / data.len() as f64)
}

/// Trains for `cfg.epochs` epochs, evaluating on `test` after each one.
pub fn fit(
    model: &mut NetworkModel,
    train: &dyn SpikeSource,
    test: &dyn SpikeSource,
    cfg: &TrainConfig,
    seed: u64,
    config_hash: &str,
) -> Result<Vec<TrainRecord>> {
    let mut opt = OptimizerState::new(model, cfg.lr_w, cfg.lr_d, cfg.lr_decay);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let train_loss = train_epoch(model, train, &mut opt, cfg, epoch, seed)?;
        let test_acc = evaluate(model, test)?;
        let seconds = if cfg.record_time { start.elapsed().as_secs_f64() } else { 0.0 };
        log::info!("seed {seed} epoch {epoch}: loss {train_loss:.5} acc {test_acc:.2}%");
        records.push(TrainRecord {
            epoch: epoch + 1,
            train_loss,
            test_acc,
            lr: opt.current_lr().0,
            seconds,
            seed,
            config_hash: config_hash.to_string(),
        });
    }
    Ok(records)
}
