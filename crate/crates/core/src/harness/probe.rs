//! Linear probe: multinomial logistic regression on frozen embeddings.

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::tape::Tape;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Per-class share of items used for fitting; the rest is held out.
    pub train_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { epochs: 100, lr: 0.05, train_fraction: 0.8 }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("probe.epochs", "must be >= 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::config("probe.lr", format!("must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("probe.train_fraction", format!("must lie in (0, 1), got {}", self.train_fraction)));
        }
        Ok(())
    }
}

/// Stratified split: each class contributes `round(fraction * count)` items to
/// the training side, keeping at least one on each side when it has two.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let mut k = (fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            k = k.clamp(1, idx.len() - 1);
        } else {
            k = 1;
        }
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Held-out accuracy of a softmax classifier fitted by full-batch Adam.
/// Predictions break ties toward the smallest class index.
pub fn linear_probe(embeddings: &Tensor, labels: &[usize], cfg: &ProbeConfig, seed: u64) -> Result<f64> {
    cfg.validate()?;
    if embeddings.rows() != labels.len() {
        return Err(Error::dim("linear_probe", format!("{} rows, {} labels", embeddings.rows(), labels.len())));
    }
    if !embeddings.is_finite() {
        return Err(Error::NonFinite("linear_probe embeddings".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let present = (0..classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::Contract("linear_probe needs at least two classes".into()));
    }
    let (train, test) = stratified_split(labels, cfg.train_fraction, seed);
    if test.is_empty() {
        return Err(Error::Contract("linear_probe held-out split is empty".into()));
    }

    let x_train = embeddings.select_rows(&train);
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let onehot = onehot(&train_labels, classes);
    let inv_n = 1.0 / train.len() as f64;

    let mut params = vec![Tensor::zeros(embeddings.cols(), classes), Tensor::zeros(1, classes)];
    let mut state = AdamState::new(&params);
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(x_train.clone());
        let y = tape.constant(onehot.clone());
        let w = tape.leaf(params[0].clone());
        let b = tape.leaf(params[1].clone());
        let xw = tape.matmul(x, w)?;
        let logits = tape.add(xw, b)?;
        let lse = tape.row_logsumexp(logits)?;
        let picked = tape.mul(logits, y)?;
        let picked = tape.row_sum(picked);
        let per_row = tape.sub(lse, picked)?;
        let total = tape.sum(per_row);
        let loss = tape.scale(total, inv_n);
        if !tape.scalar(loss)?.is_finite() {
            return Err(Error::NonFinite("linear_probe loss".into()));
        }
        let grads = tape.backward(loss)?;
        let g = [grads.get(w), grads.get(b)];
        adam_step(&mut params, &g, &mut state, &adam)?;
    }

    let logits = embeddings.select_rows(&test).matmul(&params[0])?.add(&params[1])?;
    let (_, predicted) = logits.row_max();
    let correct = test.iter().zip(&predicted).filter(|(&i, &p)| labels[i] == p).count();
    Ok(correct as f64 / test.len() as f64)
}

fn onehot(labels: &[usize], classes: usize) -> Tensor {
    let mut y = Tensor::zeros(labels.len(), classes);
    for (i, &c) in labels.iter().enumerate() {
        y.set(i, c, 1.0);
    }
    y
}
