//! Training loop and evaluation.

use super::adam::{adam_step, AdamConfig, AdamState};
use super::data::TwoViewDataset;
use super::encoder::{Embedder, MlpEncoder, View};
use super::probe::{linear_probe, ProbeConfig};
use crate::assignment::matching_accuracy;
use crate::error::{Error, Result};
use crate::losses::{contrastive_objective_on, GroundTruth, LossConfig};
use crate::simgeom::{cross_similarity, SimilarityMode};
use crate::tape::{Tape, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub probe: ProbeConfig,
    #[serde(skip)]
    pub loss: LossConfig,
    /// Drives encoder init, shuffling and the probe split.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            hidden_dim: 64,
            embed_dim: 16,
            probe: ProbeConfig::default(),
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch_size", format!("must be >= 2, got {}", self.batch_size)));
        }
        if self.hidden_dim < 1 || self.embed_dim < 1 {
            return Err(Error::config("hidden_dim", "layer widths must be >= 1"));
        }
        self.adam().validate()?;
        self.probe.validate()?;
        self.loss.validate()
    }

    /// Fresh encoder for `input_dim` features, seeded from the run seed.
    pub fn build_encoder(&self, input_dim: usize) -> Result<MlpEncoder> {
        MlpEncoder::new(&[input_dim, self.hidden_dim, self.embed_dim], &mut self.rng(1))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub matching_acc: f64,
    pub probe_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub history: Vec<EpochRecord>,
    pub final_matching_acc: f64,
    pub final_probe_acc: f64,
    /// Optimizer steps whose eigenvalue gradient was only a subgradient
    /// (near-tied eigenvalues with unequal upstream weights).
    pub degenerate_steps: usize,
    pub wall_clock_secs: f64,
}

impl RunReport {
    /// Copy with the timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self { wall_clock_secs: 0.0, ..self.clone() }
    }
}

/// Matching accuracy of the LAP assignment between embedded views under
/// Euclidean distance.
pub fn evaluate_matching<E: Embedder + ?Sized>(encoder: &E, dataset: &TwoViewDataset) -> Result<f64> {
    let za = encoder.embed(&dataset.view_a, View::A)?;
    let zb = encoder.embed(&dataset.view_b, View::B)?;
    let s = cross_similarity(&za, &zb, SimilarityMode::Euclidean)?;
    matching_accuracy(&s, dataset.gt.as_slice())
}

/// Probe accuracy on view-A embeddings.
pub fn evaluate_probe(encoder: &MlpEncoder, dataset: &TwoViewDataset, cfg: &TrainConfig) -> Result<f64> {
    let z = encoder.forward(&dataset.view_a)?;
    linear_probe(&z, &dataset.labels, &cfg.probe, cfg.seed)
}

type Objective<'a> = dyn Fn(&mut Tape, Var, Var, &GroundTruth) -> Result<Var> + 'a;

pub fn train(dataset: &TwoViewDataset, encoder: MlpEncoder, cfg: &TrainConfig) -> Result<(MlpEncoder, RunReport)> {
    let loss = cfg.loss.clone();
    train_with(dataset, encoder, cfg, &move |tape, za, zb, gt| contrastive_objective_on(tape, za, zb, gt, &loss))
}

/// Builds the encoder from `cfg` and trains it.
pub fn run(dataset: &TwoViewDataset, cfg: &TrainConfig) -> Result<(MlpEncoder, RunReport)> {
    cfg.validate()?;
    let encoder = cfg.build_encoder(dataset.dim())?;
    train(dataset, encoder, cfg)
}

fn train_with(
    dataset: &TwoViewDataset,
    mut encoder: MlpEncoder,
    cfg: &TrainConfig,
    objective: &Objective<'_>,
) -> Result<(MlpEncoder, RunReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let n = dataset.len();
    let batches = n / cfg.batch_size;
    if batches == 0 {
        return Err(Error::config("batch_size", format!("{} exceeds the dataset size {n}", cfg.batch_size)));
    }
    if encoder.widths()[0] != dataset.dim() {
        return Err(Error::dim("train", format!("encoder input {} vs data dim {}", encoder.widths()[0], dataset.dim())));
    }
    let adam = cfg.adam();
    let mut params: Vec<_> = encoder.params().into_iter().cloned().collect();
    let mut state = AdamState::new(&params);
    let mut shuffle_rng = cfg.rng(2);
    let gt = GroundTruth::identity(cfg.batch_size);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut degenerate_steps = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (step, batch) in order.chunks_exact(cfg.batch_size).enumerate() {
            let mut tape = Tape::new();
            let xa = tape.constant(dataset.view_a.select_rows(batch));
            let xb = tape.constant(dataset.view_b.select_rows(batch));
            let handles: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
            let za = encoder.forward_on(&mut tape, xa, &handles)?;
            let zb = encoder.forward_on(&mut tape, xb, &handles)?;
            let loss = objective(&mut tape, za, zb, &gt)?;
            let value = tape.scalar(loss)?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {value} at epoch {epoch}, step {step} ({} with beta {})",
                    cfg.loss.kind, cfg.loss.beta
                )));
            }
            total += value;
            let grads = tape.backward(loss)?;
            if grads.ambiguous_eigen_count() > 0 {
                degenerate_steps += 1;
            }
            let g: Vec<_> = handles.iter().map(|&h| grads.get(h)).collect();
            adam_step(&mut params, &g, &mut state, &adam)?;
            encoder.set_params(params.clone())?;
        }
        history.push(EpochRecord {
            epoch,
            mean_loss: total / batches as f64,
            matching_acc: evaluate_matching(&encoder, dataset)?,
            probe_acc: evaluate_probe(&encoder, dataset, cfg)?,
        });
    }
    let last = history.last().expect("epochs >= 1");
    let report = RunReport {
        final_matching_acc: last.matching_acc,
        final_probe_acc: last.probe_acc,
        history,
        degenerate_steps,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((encoder, report))
}
