use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::network::{argmax, Grads, Mode, Network};
use super::real::Real;
use super::tensor::Tensor;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 120,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr must be finite and nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: f64,
    m: Grads<T>,
    v: Grads<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &[Vec<T>], lr: f64) -> Self {
        let zeros: Grads<T> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self {
            lr,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Vec<T>], grads: &Grads<T>) {
        self.t += 1;
        let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
        let c1 = T::from_f64(1.0 - ADAM_BETA1.powi(self.t));
        let c2 = T::from_f64(1.0 - ADAM_BETA2.powi(self.t));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(ADAM_EPS);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses.
    pub loss: f64,
}

/// Stack samples `idx` into an [N, 1, rows, cols] tensor plus labels.
pub fn batch<T: Real>(data: &LabeledDataset, idx: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
    let mut buf = Vec::with_capacity(idx.len() * data.rows * data.cols);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = &data.samples[i];
        buf.extend(s.values.iter().map(|&v| T::from_f64(v)));
        labels.push(s.label);
    }
    Ok((
        Tensor::new(vec![idx.len(), 1, data.rows, data.cols], buf)?,
        labels,
    ))
}

/// Mini-batch Adam on mean cross-entropy. Shuffling and dropout draw from
/// streams of `cfg.seed`, so a run is reproducible bit for bit.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    data.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let spec = net.spec();
    if spec.input_h != data.rows || spec.input_w != data.cols || spec.n_classes != data.n_classes()
    {
        return Err(Error::invalid(
            "dataset shape or class count does not match the network",
        ));
    }
    let mut adam = Adam::new(net.params(), cfg.lr);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = stream(cfg.seed, Purpose::Shuffle, epoch as u64, 0);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = batch::<T>(data, idx)?;
            let mut drop = stream(cfg.seed, Purpose::Dropout, epoch as u64, bi as u64);
            let (loss, grads, stats) = net.loss_and_grads(&x, &y, Mode::TRAIN, Some(&mut drop))?;
            let l = loss.as_f64();
            if !l.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {bi} (loss {l})"
                )));
            }
            adam.step(net.params_mut(), &grads);
            net.update_running(&stats);
            total += l * idx.len() as f64;
        }
        history.push(EpochStats {
            epoch,
            loss: total / data.len() as f64,
        });
    }
    Ok(history)
}

/// Eval-mode predictions (label, confidence) for every sample.
pub fn predict_all<T: Real>(net: &Network<T>, data: &LabeledDataset) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    let k = net.spec().n_classes;
    for chunk in idx.chunks(32) {
        let (x, _) = batch::<T>(data, chunk)?;
        let probs = net.forward(&x, Mode::EVAL, None)?;
        for row in probs.data().chunks(k) {
            let (l, c) = argmax(row);
            out.push((l, c.as_f64()));
        }
    }
    Ok(out)
}

/// Accuracy and confusion matrix (rows = true label, columns = predicted).
pub fn evaluate<T: Real>(
    net: &Network<T>,
    data: &LabeledDataset,
) -> Result<(f64, Vec<Vec<usize>>)> {
    let k = data.n_classes();
    let mut confusion = vec![vec![0; k]; k];
    let preds = predict_all(net, data)?;
    let mut correct = 0;
    for (s, (p, _)) in data.samples.iter().zip(&preds) {
        confusion[s.label][*p] += 1;
        correct += usize::from(s.label == *p);
    }
    let acc = if data.is_empty() {
        0.0
    } else {
        correct as f64 / data.len() as f64
    };
    Ok((acc, confusion))
}
