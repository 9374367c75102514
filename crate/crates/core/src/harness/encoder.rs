//! Small MLP encoder with unit-norm outputs.

use super::data::{TwoViewDataset, ViewTransform};
use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    A,
    B,
}

/// Anything that maps observations of a view to embeddings.
pub trait Embedder {
    fn embed(&self, x: &Tensor, view: View) -> Result<Tensor>;
}

/// `input -> hidden (relu) -> ... -> embedding`, rows l2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpEncoder {
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl MlpEncoder {
    /// He-initialized weights, zero biases. `widths` lists every layer width
    /// including input and embedding.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::config("encoder", format!("invalid layer widths {widths:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            let data = (0..w[0] * w[1])
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    std * z
                })
                .collect();
            weights.push(Tensor::new(w[0], w[1], data)?);
            biases.push(Tensor::zeros(1, w[1]));
        }
        Ok(Self { weights, biases })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.weights.iter().map(Tensor::rows).collect();
        w.extend(self.weights.last().map(Tensor::cols));
        w
    }

    /// Weights and biases interleaved per layer.
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn set_params(&mut self, params: Vec<Tensor>) -> Result<()> {
        if params.len() != 2 * self.weights.len() {
            return Err(Error::dim("MlpEncoder::set_params", format!("{} tensors", params.len())));
        }
        for (k, p) in params.into_iter().enumerate() {
            let slot = if k % 2 == 0 { &mut self.weights[k / 2] } else { &mut self.biases[k / 2] };
            if slot.shape() != p.shape() {
                return Err(Error::dim("MlpEncoder::set_params", format!("{:?} vs {:?}", p.shape(), slot.shape())));
            }
            *slot = p;
        }
        Ok(())
    }

    /// Records the forward pass; `params` are the tape handles of [`Self::params`].
    pub fn forward_on(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var> {
        let layers = self.weights.len();
        if params.len() != 2 * layers {
            return Err(Error::dim("MlpEncoder::forward_on", format!("{} parameter handles", params.len())));
        }
        let mut h = x;
        for (l, wb) in params.chunks(2).enumerate() {
            let z = tape.matmul(h, wb[0])?;
            h = tape.add(z, wb[1])?;
            if l + 1 < layers {
                h = tape.relu(h);
            }
        }
        tape.row_l2_normalize(h)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let layers = self.weights.len();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.matmul(w)?.add(b)?;
            if l + 1 < layers {
                h = h.relu();
            }
        }
        h.row_l2_normalize()
    }
}

impl Embedder for MlpEncoder {
    fn embed(&self, x: &Tensor, _view: View) -> Result<Tensor> {
        self.forward(x)
    }
}

/// Undoes each view's affine transform, recovering the latent items.
pub struct InverseTransform<'a>(pub &'a TwoViewDataset);

impl Embedder for InverseTransform<'_> {
    fn embed(&self, x: &Tensor, view: View) -> Result<Tensor> {
        let t: &ViewTransform = match view {
            View::A => &self.0.transforms[0],
            View::B => &self.0.transforms[1],
        };
        t.invert(x)
    }
}
