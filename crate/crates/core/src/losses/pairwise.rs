//! Pairwise contrastive losses derived from the linear assignment problem.
//!
//! All losses read `s` with distance semantics: `s[i][j]` is small when row
//! item `i` and column item `j` are similar. Cosine similarities are negated
//! before they get here.
//!
//! Each loss has a tape builder (`*_on`) used for training and gradient
//! checks, plus a plain-value wrapper.

use super::{GroundTruth, Reduction};
use crate::assignment::{linear_cost, solve_lap, Sense};
use crate::error::{Error, Result};
use crate::losses::sparsemax::sparsemax_support;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

fn check_positive_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("tau", format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::config("margin", format!("margin must be non-negative, got {m}")));
    }
    Ok(())
}

fn reduce(tape: &mut Tape, per_row: Var, reduction: Reduction) -> Var {
    let n = tape.value(per_row).rows();
    let total = tape.sum(per_row);
    match reduction {
        Reduction::Sum => total,
        Reduction::Mean => tape.scale(total, 1.0 / n as f64),
    }
}

fn value_of(build: impl FnOnce(&mut Tape, Var) -> Result<Var>, s: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let v = tape.constant(s.clone());
    let out = build(&mut tape, v)?;
    tape.scalar(out)
}

/// Per-row positive entries `s[i][gt(i)]` as an `n x 1` column.
fn positives(tape: &mut Tape, s: Var, mask: &Tensor) -> Result<Var> {
    let m = tape.constant(mask.clone());
    let picked = tape.mul(s, m)?;
    Ok(tape.row_sum(picked))
}

/// Structured LAP loss with one-to-one mining:
/// `tr(S_m Y_gt^T) - min_Y tr(S_m Y^T)` with `S_m = S + m Y_gt`.
///
/// The minimizing permutation comes from the Hungarian solver; its gradient
/// is `Y_gt - Y*`.
pub fn structured_lap_loss_on(tape: &mut Tape, s: Var, gt: &GroundTruth, margin: f64) -> Result<Var> {
    check_margin(margin)?;
    let shape = tape.value(s).shape();
    if shape.0 != shape.1 {
        return Err(Error::dim("structured_lap_loss", format!("similarity matrix {shape:?} is not square")));
    }
    let gt_mask = gt.mask(shape)?;
    let margin_term = gt_mask.scale(margin);
    let s_m_value = tape.value(s).add(&margin_term)?;
    let best = solve_lap(&s_m_value, Sense::Min)?;
    // a tied ground truth counts as optimal
    let diff = if linear_cost(&s_m_value, gt.as_slice()) <= best.cost {
        Tensor::zeros(shape.0, shape.1)
    } else {
        gt_mask.sub(&Tensor::permutation_matrix(&best.perm))?
    };
    let mv = tape.constant(margin_term);
    let s_m = tape.add(s, mv)?;
    let d = tape.constant(diff);
    let weighted = tape.mul(s_m, d)?;
    Ok(tape.sum(weighted))
}

pub fn structured_lap_loss(s: &Tensor, gt: &GroundTruth, margin: f64) -> Result<f64> {
    value_of(|t, v| structured_lap_loss_on(t, v, gt, margin), s)
}

/// Batch-hard structured LAP loss: `tr(S_m Y_gt^T) - sum_i min_j [S_m]_ij`.
///
/// Row by row this is the margin triplet hinge
/// `max(0, s[i][gt(i)] + m - min_{j != gt(i)} s[i][j])`.
pub fn batch_hard_lap_loss_on(
    tape: &mut Tape,
    s: Var,
    gt: &GroundTruth,
    margin: f64,
    reduction: Reduction,
) -> Result<Var> {
    check_margin(margin)?;
    let mask = gt.mask(tape.value(s).shape())?;
    let mv = tape.constant(mask.scale(margin));
    let s_m = tape.add(s, mv)?;
    let pos = positives(tape, s_m, &mask)?;
    let hardest = tape.row_min(s_m);
    let per_row = tape.sub(pos, hardest)?;
    Ok(reduce(tape, per_row, reduction))
}

/// Batch sum of the batch-hard loss.
pub fn batch_hard_lap_loss(s: &Tensor, gt: &GroundTruth, margin: f64) -> Result<f64> {
    value_of(|t, v| batch_hard_lap_loss_on(t, v, gt, margin, Reduction::Sum), s)
}

/// Log-sum-exp smoothing of the batch-hard loss:
/// `tr(S Y_gt^T) + tau * sum_i log sum_j exp(-s_ij / tau)`.
pub fn smoothed_batch_hard_loss_on(
    tape: &mut Tape,
    s: Var,
    gt: &GroundTruth,
    tau: f64,
    reduction: Reduction,
) -> Result<Var> {
    check_positive_tau(tau)?;
    let mask = gt.mask(tape.value(s).shape())?;
    let pos = positives(tape, s, &mask)?;
    let logits = tape.scale(s, -1.0 / tau);
    let lse = tape.row_logsumexp(logits)?;
    let smooth_min = tape.scale(lse, tau);
    let per_row = tape.add(pos, smooth_min)?;
    Ok(reduce(tape, per_row, reduction))
}

/// Batch sum of the smoothed batch-hard loss.
pub fn smoothed_batch_hard_loss(s: &Tensor, gt: &GroundTruth, tau: f64) -> Result<f64> {
    value_of(|t, v| smoothed_batch_hard_loss_on(t, v, gt, tau, Reduction::Sum), s)
}

/// InfoNCE / NT-Xent with per-row term
/// `l_i = s[i][gt(i)] / tau + log sum_j exp(-s_ij / tau)`.
/// The positive column is part of the log-sum-exp.
pub fn infonce_loss_on(tape: &mut Tape, s: Var, gt: &GroundTruth, tau: f64, reduction: Reduction) -> Result<Var> {
    check_positive_tau(tau)?;
    let mask = gt.mask(tape.value(s).shape())?;
    let scaled = tape.scale(s, 1.0 / tau);
    let pos = positives(tape, scaled, &mask)?;
    let logits = tape.neg(scaled);
    let lse = tape.row_logsumexp(logits)?;
    let per_row = tape.add(pos, lse)?;
    Ok(reduce(tape, per_row, reduction))
}

pub fn infonce_loss(s: &Tensor, gt: &GroundTruth, tau: f64, reduction: Reduction) -> Result<f64> {
    value_of(|t, v| infonce_loss_on(t, v, gt, tau, reduction), s)
}

/// Logistic pair loss against the batch-hard negative:
/// `softplus(s_pos / tau) + softplus(-s_neg / tau)` per row, i.e.
/// `-log sigma(-s_pos/tau) - log sigma(s_neg/tau)`.
pub fn nt_logistic_loss_on(
    tape: &mut Tape,
    s: Var,
    gt: &GroundTruth,
    tau: f64,
    reduction: Reduction,
) -> Result<Var> {
    check_positive_tau(tau)?;
    let value = tape.value(s);
    if value.cols() < 2 {
        return Err(Error::Contract("nt_logistic needs at least one negative column".into()));
    }
    let mask = gt.mask(value.shape())?;
    // lift positives above every other entry so row_min picks a negative
    let lift = value.data().iter().fold(0.0f64, |m, x| m.max(x.abs())) * 2.0 + 1.0;
    let pos = positives(tape, s, &mask)?;
    let lv = tape.constant(mask.scale(lift));
    let lifted = tape.add(s, lv)?;
    let neg = tape.row_min(lifted);
    let pos_logit = tape.scale(pos, 1.0 / tau);
    let neg_logit = tape.scale(neg, -1.0 / tau);
    let a = tape.softplus(pos_logit)?;
    let b = tape.softplus(neg_logit)?;
    let per_row = tape.add(a, b)?;
    Ok(reduce(tape, per_row, reduction))
}

/// Row mean of the NT-Logistic loss.
pub fn nt_logistic_loss(s: &Tensor, gt: &GroundTruth, tau: f64) -> Result<f64> {
    value_of(|t, v| nt_logistic_loss_on(t, v, gt, tau, Reduction::Mean), s)
}

/// Per-row sparsemax supports of `-s` as a 0/1 mask, plus support sizes.
fn sparse_supports(s: &Tensor) -> (Tensor, Vec<f64>) {
    let mut mask = Tensor::zeros(s.rows(), s.cols());
    let mut sizes = Vec::with_capacity(s.rows());
    for i in 0..s.rows() {
        let z: Vec<f64> = s.row(i).iter().map(|x| -x).collect();
        let support = sparsemax_support(&z);
        for &j in &support {
            mask.set(i, j, 1.0);
        }
        sizes.push(support.len() as f64);
    }
    (mask, sizes)
}

/// SparseCLR with batch-hard mining:
/// `tr(S Y_gt^T) - 1/2 sum_i sum_{j in Omega(-h_i)} (h_ij^2 - T(-h_i)^2)`
/// where `h_i` is row `i` of `s` and `Omega`, `T` are the sparsemax support
/// and threshold.
///
/// The support is held fixed during differentiation, so the gradient of row
/// `i` is `Y_gt + sparsemax(-h_i)`.
pub fn sparseclr_loss_on(tape: &mut Tape, s: Var, gt: &GroundTruth, reduction: Reduction) -> Result<Var> {
    let value = tape.value(s);
    let mask = gt.mask(value.shape())?;
    let (support, sizes) = sparse_supports(value);

    let pos = positives(tape, s, &mask)?;
    let sup = tape.constant(support);
    let k = tape.constant(Tensor::column(&sizes));
    let inv_k = tape.constant(Tensor::column(&sizes.iter().map(|k| 1.0 / k).collect::<Vec<_>>()));

    // T_i = (sum_{j in support} -s_ij - 1) / k_i
    let neg_s = tape.neg(s);
    let z_sup = tape.mul(neg_s, sup)?;
    let z_sum = tape.row_sum(z_sup);
    let z_sum_m1 = tape.add_scalar(z_sum, -1.0)?;
    let thresh = tape.mul(z_sum_m1, inv_k)?;

    let sq = tape.mul(s, s)?;
    let sq_sup = tape.mul(sq, sup)?;
    let sq_sum = tape.row_sum(sq_sup);
    let t_sq = tape.mul(thresh, thresh)?;
    let k_t_sq = tape.mul(t_sq, k)?;
    let energy = tape.sub(sq_sum, k_t_sq)?;
    let half = tape.scale(energy, 0.5);
    let per_row = tape.sub(pos, half)?;
    Ok(reduce(tape, per_row, reduction))
}

/// Batch sum of the SparseCLR loss.
pub fn sparseclr_loss(s: &Tensor, gt: &GroundTruth) -> Result<f64> {
    value_of(|t, v| sparseclr_loss_on(t, v, gt, Reduction::Sum), s)
}
