//! Synthetic two-view datasets.

use crate::error::{Error, Result};
use crate::losses::GroundTruth;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Class-structured items seen through two affine views.
///
/// Each item is `x = center[class] + item_sigma * n`. View `k` maps it to
/// `Q_k x + b_k + noise_sigma * n'` with `Q_k` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub ambient_dim: usize,
    /// Spread of the class centers.
    pub center_sigma: f64,
    /// Within-class spread of the items.
    pub item_sigma: f64,
    /// Per-view observation noise.
    pub noise_sigma: f64,
    /// Spread of the per-view biases.
    pub bias_sigma: f64,
    /// `Q_k` is the orthonormalization of `I + view_mixing * G`; large values
    /// approach a uniformly random rotation.
    pub view_mixing: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 8,
            samples_per_class: 16,
            ambient_dim: 32,
            center_sigma: 1.0,
            item_sigma: 0.5,
            noise_sigma: 0.05,
            bias_sigma: 0.5,
            view_mixing: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn num_items(&self) -> usize {
        self.num_classes * self.samples_per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes", "need at least 2 classes"));
        }
        if self.samples_per_class < 1 {
            return Err(Error::config("samples_per_class", "must be >= 1"));
        }
        if self.ambient_dim < 1 {
            return Err(Error::config("ambient_dim", "must be >= 1"));
        }
        for (name, v) in [
            ("center_sigma", self.center_sigma),
            ("item_sigma", self.item_sigma),
            ("noise_sigma", self.noise_sigma),
            ("bias_sigma", self.bias_sigma),
            ("view_mixing", self.view_mixing),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `y = x Q^T + b` on row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTransform {
    pub rotation: Tensor,
    pub bias: Tensor,
}

impl ViewTransform {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul(&self.rotation.transpose())?.add(&self.bias)
    }

    /// `x = (y - b) Q`.
    pub fn invert(&self, y: &Tensor) -> Result<Tensor> {
        y.sub(&self.bias)?.matmul(&self.rotation)
    }
}

#[derive(Debug, Clone)]
pub struct TwoViewDataset {
    pub view_a: Tensor,
    pub view_b: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Row `i` of `view_a` matches row `gt[i]` of `view_b`.
    pub gt: GroundTruth,
    pub transforms: [ViewTransform; 2],
}

impl TwoViewDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.view_a.cols()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sigma: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect();
    Tensor::from_raw(rows, cols, data)
}

/// Modified Gram-Schmidt on the columns of a square matrix.
fn orthonormalize(m: &Tensor) -> Result<Tensor> {
    let n = m.rows();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| (0..n).map(|r| m.get(r, c)).collect()).collect();
    for c in 0..n {
        for p in 0..c {
            let (done, rest) = cols.split_at_mut(c);
            let proj: f64 = done[p].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (x, q) in rest[0].iter_mut().zip(&done[p]) {
                *x -= proj * q;
            }
        }
        let norm = cols[c].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::Degenerate("view transform is rank deficient".into()));
        }
        cols[c].iter_mut().for_each(|x| *x /= norm);
    }
    let mut q = Tensor::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            q.set(r, c, v);
        }
    }
    Ok(q)
}

fn random_view(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Result<ViewTransform> {
    let d = spec.ambient_dim;
    let g = gaussian(rng, d, d, spec.view_mixing / (d as f64).sqrt());
    let rotation = orthonormalize(&Tensor::identity(d).add(&g)?)?;
    let bias = gaussian(rng, 1, d, spec.bias_sigma);
    Ok(ViewTransform { rotation, bias })
}

/// Draws the dataset described by `spec`; identical specs give bitwise
/// identical datasets.
pub fn gen_two_view_dataset(spec: &SyntheticSpec) -> Result<TwoViewDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (k, per, d) = (spec.num_classes, spec.samples_per_class, spec.ambient_dim);
    let centers = gaussian(&mut rng, k, d, spec.center_sigma);

    let guard = 4.0 * spec.noise_sigma;
    for i in 0..k {
        for j in i + 1..k {
            let dist = centers.row(i).iter().zip(centers.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist < guard {
                return Err(Error::config(
                    "noise_sigma",
                    format!("classes {i} and {j} are {dist:.4} apart, below 4 * noise_sigma = {guard:.4}"),
                ));
            }
        }
    }

    let labels: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, per)).collect();
    let spread = gaussian(&mut rng, k * per, d, spec.item_sigma);
    let items = centers.select_rows(&labels).add(&spread)?;

    let transforms = [random_view(&mut rng, spec)?, random_view(&mut rng, spec)?];
    let mut views = Vec::with_capacity(2);
    for t in &transforms {
        let clean = t.apply(&items)?;
        let noise = gaussian(&mut rng, k * per, d, spec.noise_sigma);
        views.push(clean.add(&noise)?);
    }
    let view_b = views.pop().expect("two views");
    let view_a = views.pop().expect("two views");
    Ok(TwoViewDataset { view_a, view_b, gt: GroundTruth::identity(labels.len()), labels, num_classes: k, transforms })
}
