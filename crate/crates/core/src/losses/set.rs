//! Set-level losses from the quadratic assignment problem.

use super::GroundTruth;
use crate::assignment::{brute_force_qap, linear_cost, Sense};
use crate::error::{Error, Result};
use crate::simgeom::{eig_dot, sym_eigen, SimilarityMode};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Quadratic assignment regularizer on the tape.
///
/// Distance modes: `-<lambda(S_A), lambda(S_B)>_min`.
/// Cosine mode: `<lambda(1 + S_A), lambda(1 + S_B)>_max`, the shift making
/// similarities non-negative.
pub fn qare_on(tape: &mut Tape, intra_a: Var, intra_b: Var, mode: SimilarityMode) -> Result<Var> {
    let (sa, sb) = (tape.value(intra_a).shape(), tape.value(intra_b).shape());
    if sa != sb {
        return Err(Error::dim("qare", format!("intra-set shapes {sa:?} and {sb:?}")));
    }
    if mode.is_distance() {
        let la = tape.sym_eigenvalues(intra_a, false)?;
        let lb = tape.sym_eigenvalues(intra_b, true)?;
        let prod = tape.mul(la, lb)?;
        let dot = tape.sum(prod);
        Ok(tape.neg(dot))
    } else {
        let shifted_a = tape.add_scalar(intra_a, 1.0)?;
        let shifted_b = tape.add_scalar(intra_b, 1.0)?;
        let la = tape.sym_eigenvalues(shifted_a, false)?;
        let lb = tape.sym_eigenvalues(shifted_b, false)?;
        let prod = tape.mul(la, lb)?;
        Ok(tape.sum(prod))
    }
}

/// Value of the quadratic assignment regularizer.
pub fn qare(intra_a: &Tensor, intra_b: &Tensor, mode: SimilarityMode) -> Result<f64> {
    if intra_a.shape() != intra_b.shape() {
        return Err(Error::dim("qare", format!("intra-set shapes {:?} and {:?}", intra_a.shape(), intra_b.shape())));
    }
    if mode.is_distance() {
        let la = sym_eigen(intra_a)?.values;
        let lb = sym_eigen(intra_b)?.values;
        Ok(-eig_dot(&la, &lb, Sense::Min)?)
    } else {
        let one = Tensor::scalar(1.0);
        let la = sym_eigen(&intra_a.add(&one)?)?.values;
        let lb = sym_eigen(&intra_b.add(&one)?)?.values;
        eig_dot(&la, &lb, Sense::Max)
    }
}

/// `alpha * pairwise + beta * qare / n^2`.
pub fn combined_loss(pairwise: f64, qare_value: f64, alpha: f64, beta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Contract("combined_loss needs n >= 1".into()));
    }
    Ok(alpha * pairwise + beta * qare_value / (n * n) as f64)
}

/// Tape form of [`combined_loss`]. With `qare == None` (used when `beta == 0`)
/// the result is `alpha * pairwise` and no eigen-decomposition is recorded.
pub fn combined_loss_on(
    tape: &mut Tape,
    pairwise: Var,
    qare: Option<Var>,
    alpha: f64,
    beta: f64,
    n: usize,
) -> Result<Var> {
    if n == 0 {
        return Err(Error::Contract("combined_loss needs n >= 1".into()));
    }
    let weighted = tape.scale(pairwise, alpha);
    match qare {
        Some(q) => {
            let reg = tape.scale(q, beta / (n * n) as f64);
            tape.add(weighted, reg)
        }
        None => Ok(weighted),
    }
}

/// Exact structured QAP loss `tr(S Y_gt^T) - min_Y {tr(S Y^T) + tr(S_A Y S_B^T Y^T)}`
/// by exhaustive search (`N <= 8`). Reference use only.
pub fn structured_qap_loss_exact(s: &Tensor, intra_a: &Tensor, intra_b: &Tensor, gt: &GroundTruth) -> Result<f64> {
    gt.mask(s.shape())?;
    let best = brute_force_qap(s, intra_a, intra_b, Sense::Min)?;
    Ok(linear_cost(s, gt.as_slice()) - best.cost)
}
