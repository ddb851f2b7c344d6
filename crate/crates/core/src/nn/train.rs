//! Minibatch training of one individual.

use std::time::Instant;

use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::seed;
use crate::tensor::Tensor4;

use super::loss::{accuracy_from_mse, mse, softmax_cross_entropy};
use super::{Network, Tape};

/// What the network is trained to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Softmax classification over `classes` labels.
    Classify { classes: usize },
    /// Reproduce the input (autoencoder).
    Reconstruct,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Seeds batch order and (for fresh networks) weight init.
    pub seed: u64,
    /// Training stops, reporting `cancelled`, once this instant passes.
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_loss: f64,
    /// Validation accuracy (classifiers) or reconstruction accuracy (CAEs).
    pub metric: f64,
    pub wall_seconds: f64,
    pub diverged: bool,
    pub cancelled: bool,
}

const EVAL_CHUNK: usize = 256;

/// Trains `net` in place and evaluates it on `val`.
///
/// A non-finite loss aborts training; the network is restored to its
/// starting parameters and the report carries `diverged` with metric 0.
pub fn train_network(
    net: &mut Network,
    objective: Objective,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if cfg.epochs == 0 {
        return Err(Error::Precondition("epochs must be at least 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Precondition("batch size must be at least 1".into()));
    }
    if val.is_empty() {
        return Err(Error::Precondition("validation split is empty".into()));
    }
    let start = Instant::now();
    let initial = net.clone();
    let mut tape = Tape::new();
    let mut last_loss = f64::NAN;
    let report = |epochs_run, loss, metric, diverged, cancelled| TrainReport {
        epochs_run,
        final_train_loss: loss,
        metric,
        wall_seconds: start.elapsed().as_secs_f64(),
        diverged,
        cancelled,
    };

    for epoch in 0..cfg.epochs {
        let order = batches(
            train.len(),
            cfg.batch_size,
            seed::derive(cfg.seed, epoch as u64),
        );
        let mut epoch_loss = 0.0;
        for idx in &order {
            if cfg.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(report(epoch, last_loss, 0.0, false, true));
            }
            let x = train.samples.gather(idx);
            let out = net.forward_tape(&x, &mut tape)?;
            let step = match objective {
                Objective::Classify { .. } => {
                    let labels: Vec<u8> = idx.iter().map(|&i| train.labels[i]).collect();
                    softmax_cross_entropy(&out, &labels).map(|(l, g, _)| (l, g))
                }
                Objective::Reconstruct => mse(&out, &x),
            };
            let (loss, grad) = match step {
                Ok(v) if v.0.is_finite() => v,
                Ok(_) | Err(Error::Diverged(_)) => {
                    *net = initial;
                    return Ok(report(epoch, f64::NAN, 0.0, true, false));
                }
                Err(e) => return Err(e),
            };
            let (_, grads) = net.backward(&tape, &grad)?;
            net.sgd_step(&grads, cfg.learning_rate, cfg.momentum);
            epoch_loss += loss;
        }
        if !net.params_finite() {
            *net = initial;
            return Ok(report(epoch, f64::NAN, 0.0, true, false));
        }
        if !order.is_empty() {
            last_loss = epoch_loss / order.len() as f64;
        }
    }
    let metric = evaluate(net, objective, val)?;
    if !metric.is_finite() {
        *net = initial;
        return Ok(report(cfg.epochs, f64::NAN, 0.0, true, false));
    }
    Ok(report(cfg.epochs, last_loss, metric, false, false))
}

/// Validation metric: classification accuracy, or `clamp(1 - MSE, 0, 1)`.
pub fn evaluate(net: &Network, objective: Objective, ds: &Dataset) -> Result<f64> {
    let n = ds.len();
    if n == 0 {
        return Err(Error::Precondition(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    let mut correct = 0usize;
    let mut sq_err = 0.0;
    let mut elements = 0usize;
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let x = ds.samples.gather(chunk);
        let out = net.forward(&x)?;
        match objective {
            Objective::Classify { .. } => {
                for (row, &i) in chunk.iter().enumerate() {
                    if argmax(out.sample(row)) == ds.labels[i] as usize {
                        correct += 1;
                    }
                }
            }
            Objective::Reconstruct => {
                if out.dims() != x.dims() {
                    return Err(Error::shape(
                        net.layers().len(),
                        format!(
                            "reconstruction dims {:?} vs input {:?}",
                            out.dims(),
                            x.dims()
                        ),
                    ));
                }
                sq_err += out
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                elements += x.len();
            }
        }
    }
    Ok(match objective {
        Objective::Classify { .. } => correct as f64 / n as f64,
        Objective::Reconstruct => accuracy_from_mse(sq_err / elements.max(1) as f64),
    })
}

/// Class predictions for every sample.
pub fn predict(net: &Network, samples: &Tensor4) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..samples.batch()).collect();
    let mut out = Vec::with_capacity(all.len());
    for chunk in all.chunks(EVAL_CHUNK) {
        let logits = net.forward(&samples.gather(chunk))?;
        out.extend((0..chunk.len()).map(|r| argmax(logits.sample(r))));
    }
    Ok(out)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Builds a fresh network for `genome` and trains it.
pub fn train_individual(
    genome: &Genome,
    train: &Dataset,
    val: &Dataset,
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    let input = train.sample_shape();
    let mut rng = seed::rng(seed::derive(cfg.seed, 0x1417));
    let mut net = genome.build_network(input, classes, &mut rng)?;
    let objective = genome.kind.objective(classes);
    let report = train_network(&mut net, objective, train, val, cfg)?;
    Ok((net, report))
}
