//! Contrastive objectives.
//!
//! Pairwise losses ([`pairwise`]) come from the linear assignment problem:
//! the structured LAP loss, its batch-hard relaxation (margin triplet), the
//! log-sum-exp smoothing (InfoNCE), NT-Logistic and SparseCLR. Set-level
//! terms ([`set`]) come from the quadratic assignment problem: the
//! eigenvalue regularizer (QARe) and the exact structured QAP loss.

pub mod pairwise;
pub mod set;
pub mod sparsemax;

pub use pairwise::{
    batch_hard_lap_loss, batch_hard_lap_loss_on, infonce_loss, infonce_loss_on, nt_logistic_loss,
    nt_logistic_loss_on, smoothed_batch_hard_loss, smoothed_batch_hard_loss_on, sparseclr_loss, sparseclr_loss_on,
    structured_lap_loss, structured_lap_loss_on,
};
pub use set::{combined_loss, combined_loss_on, qare, qare_on, structured_qap_loss_exact};
pub use sparsemax::{sparsemax, sparsemax_support, sparsemax_threshold};

use crate::error::{Error, Result};
use crate::simgeom::SimilarityMode;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Ground-truth alignment: row `i` matches column `gt[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth(Vec<usize>);

impl GroundTruth {
    /// Rejects repeated columns.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(perm.len());
        if let Some(dup) = perm.iter().find(|j| !seen.insert(**j)) {
            return Err(Error::Contract(format!("ground truth assigns column {dup} twice")));
        }
        Ok(Self(perm))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 0/1 matrix `Y_gt` of the given shape.
    pub fn mask(&self, shape: (usize, usize)) -> Result<Tensor> {
        let (rows, cols) = shape;
        if self.0.len() != rows {
            return Err(Error::dim("ground truth", format!("{} entries for {rows} rows", self.0.len())));
        }
        let mut y = Tensor::zeros(rows, cols);
        for (i, &j) in self.0.iter().enumerate() {
            if j >= cols {
                return Err(Error::dim("ground truth", format!("column {j} out of range for {cols} columns")));
            }
            y.set(i, j, 1.0);
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

/// Pairwise term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Structured LAP loss with margin; batch-hard mining gives the margin triplet.
    Triplet,
    /// Log-sum-exp smoothed batch-hard loss.
    Smoothed,
    Infonce,
    NtLogistic,
    Sparseclr,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossKind::Triplet => "triplet",
            LossKind::Smoothed => "smoothed",
            LossKind::Infonce => "infonce",
            LossKind::NtLogistic => "nt_logistic",
            LossKind::Sparseclr => "sparseclr",
        };
        f.write_str(s)
    }
}

/// Negative mining for the structured LAP loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mining {
    /// Permutation-constrained (Hungarian) negatives.
    OneToOne,
    /// Row-wise hardest negatives.
    #[default]
    BatchHard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub margin: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mode: SimilarityMode,
    pub mining: Mining,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Infonce,
            margin: 0.5,
            tau: 0.05,
            alpha: 1.0,
            beta: 1.0,
            mode: SimilarityMode::Cosine,
            mining: Mining::BatchHard,
            reduction: Reduction::Mean,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("margin", self.margin)?;
        finite_nonneg("alpha", self.alpha)?;
        finite_nonneg("beta", self.beta)?;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config("tau", format!("must be > 0, got {}", self.tau)));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::config("alpha", "alpha + beta must be positive"));
        }
        if self.mining == Mining::OneToOne && self.kind != LossKind::Triplet {
            return Err(Error::config(
                "mining",
                format!("one_to_one mining is only defined for triplet, not {}", self.kind),
            ));
        }
        Ok(())
    }
}

/// Inter- and intra-set matrices built on the tape.
pub struct TapedSimilarities {
    /// Inter-set matrix with distance semantics (negated for cosine).
    pub pairwise: Var,
    pub intra_a: Var,
    pub intra_b: Var,
}

pub fn similarities_on(tape: &mut Tape, za: Var, zb: Var, mode: SimilarityMode) -> Result<TapedSimilarities> {
    match mode {
        SimilarityMode::Euclidean | SimilarityMode::SquaredEuclidean => {
            let squared = mode == SimilarityMode::SquaredEuclidean;
            Ok(TapedSimilarities {
                pairwise: tape.pairwise_distances(za, zb, squared)?,
                intra_a: tape.pairwise_distances(za, za, squared)?,
                intra_b: tape.pairwise_distances(zb, zb, squared)?,
            })
        }
        SimilarityMode::Cosine => {
            let na = tape.row_l2_normalize(za)?;
            let nb = tape.row_l2_normalize(zb)?;
            let nat = tape.transpose(na);
            let nbt = tape.transpose(nb);
            let inter = tape.matmul(na, nbt)?;
            Ok(TapedSimilarities {
                pairwise: tape.neg(inter),
                intra_a: tape.matmul(na, nat)?,
                intra_b: tape.matmul(nb, nbt)?,
            })
        }
    }
}

/// Pairwise term selected by `cfg` on a distance-semantics matrix.
pub fn pairwise_loss_on(tape: &mut Tape, s: Var, gt: &GroundTruth, cfg: &LossConfig) -> Result<Var> {
    match (cfg.kind, cfg.mining) {
        (LossKind::Triplet, Mining::OneToOne) => {
            let total = structured_lap_loss_on(tape, s, gt, cfg.margin)?;
            Ok(match cfg.reduction {
                Reduction::Sum => total,
                Reduction::Mean => tape.scale(total, 1.0 / gt.len() as f64),
            })
        }
        (LossKind::Triplet, Mining::BatchHard) => batch_hard_lap_loss_on(tape, s, gt, cfg.margin, cfg.reduction),
        (LossKind::Smoothed, _) => smoothed_batch_hard_loss_on(tape, s, gt, cfg.tau, cfg.reduction),
        (LossKind::Infonce, _) => infonce_loss_on(tape, s, gt, cfg.tau, cfg.reduction),
        (LossKind::NtLogistic, _) => nt_logistic_loss_on(tape, s, gt, cfg.tau, cfg.reduction),
        (LossKind::Sparseclr, _) => sparseclr_loss_on(tape, s, gt, cfg.reduction),
    }
}

/// Full objective `alpha * pairwise + beta * qare / N^2` from two embedding
/// sets. With `beta == 0` the intra-set matrices are never built.
pub fn contrastive_objective_on(
    tape: &mut Tape,
    za: Var,
    zb: Var,
    gt: &GroundTruth,
    cfg: &LossConfig,
) -> Result<Var> {
    cfg.validate()?;
    let n = tape.value(za).rows();
    if cfg.beta == 0.0 {
        let s = match cfg.mode {
            SimilarityMode::Cosine => {
                let na = tape.row_l2_normalize(za)?;
                let nb = tape.row_l2_normalize(zb)?;
                let nbt = tape.transpose(nb);
                let inter = tape.matmul(na, nbt)?;
                tape.neg(inter)
            }
            mode => tape.pairwise_distances(za, zb, mode == SimilarityMode::SquaredEuclidean)?,
        };
        let p = pairwise_loss_on(tape, s, gt, cfg)?;
        return combined_loss_on(tape, p, None, cfg.alpha, cfg.beta, n);
    }
    let sims = similarities_on(tape, za, zb, cfg.mode)?;
    let p = pairwise_loss_on(tape, sims.pairwise, gt, cfg)?;
    let q = qare_on(tape, sims.intra_a, sims.intra_b, cfg.mode)?;
    combined_loss_on(tape, p, Some(q), cfg.alpha, cfg.beta, n)
}
