//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Default step for [`gradcheck`].
pub const DEFAULT_EPS: f64 = 1e-6;

fn eval_value<F>(f: &F, x: Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.constant(x);
    let out = f(&mut tape, v)?;
    tape.scalar(out)
}

/// Max over coordinates of `|analytic - central_difference| / max(1, |analytic|)`
/// for the scalar function `f` at `x`.
pub fn gradcheck<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("gradcheck step must be positive, got {eps}")));
    }
    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = f(&mut tape, leaf)?;
    let value = tape.scalar(out)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("gradcheck objective".into()));
    }
    let analytic = tape.backward(out)?.get(leaf);

    let mut worst: f64 = 0.0;
    let (rows, cols) = x.shape();
    for r in 0..rows {
        for c in 0..cols {
            let mut plus = x.clone();
            plus.set(r, c, x.get(r, c) + eps);
            let mut minus = x.clone();
            minus.set(r, c, x.get(r, c) - eps);
            let (fp, fm) = (eval_value(&f, plus)?, eval_value(&f, minus)?);
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite(format!("gradcheck objective at ({r},{c}) +/- eps")));
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.get(r, c);
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
