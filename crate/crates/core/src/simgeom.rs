//! Similarity matrices between embedding sets and the symmetric eigenvalue
//! kernel behind the quadratic assignment regularizer.

use crate::assignment::Sense;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

/// How inter- and intra-set matrices are computed from embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Unsquared Euclidean distance (smaller means more similar).
    #[default]
    Euclidean,
    /// Squared Euclidean distance; same sense as [`SimilarityMode::Euclidean`].
    SquaredEuclidean,
    /// Cosine similarity (larger means more similar).
    Cosine,
}

impl SimilarityMode {
    /// Whether matrix entries behave as distances.
    pub fn is_distance(self) -> bool {
        !matches!(self, SimilarityMode::Cosine)
    }
}

/// Inter-set matrix `inter[i][j] = phi(a_i, b_j)` plus both intra-set matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTriple {
    pub inter: Tensor,
    pub intra_a: Tensor,
    pub intra_b: Tensor,
    pub mode: SimilarityMode,
}

impl SimilarityTriple {
    pub fn n(&self) -> usize {
        self.inter.rows()
    }
}

/// Matrix of `phi(a_i, b_j)` for the rows of `a` and `b`.
pub fn cross_similarity(a: &Tensor, b: &Tensor, mode: SimilarityMode) -> Result<Tensor> {
    if a.cols() != b.cols() {
        return Err(Error::dim(
            "cross_similarity",
            format!("embedding widths {} and {}", a.cols(), b.cols()),
        ));
    }
    match mode {
        SimilarityMode::Euclidean | SimilarityMode::SquaredEuclidean => {
            let squared = mode == SimilarityMode::SquaredEuclidean;
            let mut out = Tensor::zeros(a.rows(), b.rows());
            for i in 0..a.rows() {
                for j in 0..b.rows() {
                    let d2: f64 = a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
                    out.set(i, j, if squared { d2 } else { d2.sqrt() });
                }
            }
            Ok(out)
        }
        SimilarityMode::Cosine => {
            let an = a.row_l2_normalize()?;
            let bn = b.row_l2_normalize()?;
            an.matmul(&bn.transpose())
        }
    }
}

/// Builds the inter-set and both intra-set matrices for two embedding sets.
pub fn pairwise_distances(za: &Tensor, zb: &Tensor, mode: SimilarityMode) -> Result<SimilarityTriple> {
    if za.shape() != zb.shape() {
        return Err(Error::dim(
            "pairwise_distances",
            format!("views have shapes {:?} and {:?}", za.shape(), zb.shape()),
        ));
    }
    if za.rows() < 2 {
        return Err(Error::Contract(format!("need at least 2 items per view, got {}", za.rows())));
    }
    Ok(SimilarityTriple {
        inter: cross_similarity(za, zb, mode)?,
        intra_a: cross_similarity(za, za, mode)?,
        intra_b: cross_similarity(zb, zb, mode)?,
        mode,
    })
}

/// Eigenpairs of a symmetric matrix, values sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Tensor,
}

/// Minimum gap between distinct eigenvalues for the gradient to be exact.
pub const EIGEN_GAP_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_TOL: f64 = 1e-12;

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|r| self.vectors.get(r, k)).collect()
    }

    /// Smallest gap between consecutive eigenvalues (`inf` for `n < 2`).
    pub fn min_gap(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
    }

    /// True when some pair of eigenvalues is closer than [`EIGEN_GAP_TOL`],
    /// so the gradient is only a subgradient.
    pub fn is_degenerate(&self) -> bool {
        self.min_gap() < EIGEN_GAP_TOL
    }
}

/// True when a near-tied eigenvalue pair carries different upstream weights,
/// so `eigenvalue_gradient` depends on the arbitrary basis chosen inside the
/// tied eigenspace. Equal weights on a tie give a basis-free projector term.
pub fn gradient_is_ambiguous(eig: &EigenDecomposition, upstream: &[f64]) -> bool {
    let scale = 1.0 + upstream.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    eig.values
        .windows(2)
        .zip(upstream.windows(2))
        .any(|(v, g)| v[0] - v[1] < EIGEN_GAP_TOL && (g[0] - g[1]).abs() > 1e-12 * scale)
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// The input is symmetrized as `(M + M^T) / 2` first. Iterates until the
/// off-diagonal Frobenius norm drops to `1e-12 * ||M||_F`, for at most 50 sweeps.
pub fn sym_eigen(m: &Tensor) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::dim("sym_eigen", format!("shape {:?} is not square", m.shape())));
    }
    let n = m.rows();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i));
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sym_eigen input".into()));
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_REL_TOL * norm;
    let mut v = Tensor::identity(n).into_data();

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Tensor::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, k, v[r * n + src]);
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Extreme dot product of two spectra over all pairings.
///
/// `Min` pairs `a` descending with `b` ascending, `Max` pairs both descending
/// (rearrangement inequality). Inputs need not be pre-sorted.
pub fn eig_dot(a: &[f64], b: &[f64], sense: Sense) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("eig_dot", format!("lengths {} and {}", a.len(), b.len())));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    match sense {
        Sense::Min => b.sort_by(|x, y| x.total_cmp(y)),
        Sense::Max => b.sort_by(|x, y| y.total_cmp(x)),
    }
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}

/// Gradient of a scalar `L(lambda(M))` with respect to `M`, given
/// `upstream[k] = dL/d values[k]`.
///
/// Uses `d lambda_k / dM = u_k u_k^T`. For repeated eigenvalues the computed
/// basis is used as-is, which yields a subgradient.
pub fn eigenvalue_gradient(eig: &EigenDecomposition, upstream: &[f64]) -> Result<Tensor> {
    let n = eig.n();
    if upstream.len() != n {
        return Err(Error::dim("eigenvalue_gradient", format!("{} upstream values for {n} eigenvalues", upstream.len())));
    }
    let mut g = Tensor::zeros(n, n);
    for (k, &w) in upstream.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let wi = w * eig.vectors.get(i, k);
            for j in 0..n {
                let cur = g.get(i, j);
                g.set(i, j, cur + wi * eig.vectors.get(j, k));
            }
        }
    }
    // symmetrize to remove rounding asymmetry
    let gt = g.transpose();
    Ok(g.add(&gt)?.scale(0.5))
}
