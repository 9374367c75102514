//! Self-check suites: each runs a randomized family of instances against an
//! independent reference and reports the worst deviation.

use crate::assignment::{brute_force_lap, for_each_permutation, solve_lap, Sense};
use crate::error::Result;
use crate::gradcheck::{gradcheck, DEFAULT_EPS};
use crate::harness::fig1b_instance;
use crate::losses::{
    batch_hard_lap_loss, batch_hard_lap_loss_on, combined_loss_on, infonce_loss, infonce_loss_on, nt_logistic_loss_on,
    qare, qare_on, similarities_on, smoothed_batch_hard_loss, smoothed_batch_hard_loss_on, sparseclr_loss_on,
    sparsemax, sparsemax_threshold, structured_lap_loss, structured_lap_loss_on, structured_qap_loss_exact,
    GroundTruth, Reduction,
};
use crate::simgeom::{eig_dot, pairwise_distances, sym_eigen, SimilarityMode};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::time::Instant;

pub const SUITES: [&str; 8] = ["sandwich", "prop1", "prop2", "upper_bound", "lap", "sparsemax", "gradients", "fig1b"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<12} cases={:<5} max_error={:.3e} tol={:.0e} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_error,
            self.tolerance,
            self.seconds
        )
    }
}

type EigDot = fn(&[f64], &[f64], Sense) -> Result<f64>;

/// Runs the named suite, or `None` for an unknown name.
pub fn run_suite(name: &str) -> Option<Result<SuiteReport>> {
    let start = Instant::now();
    let (name, result) = match name {
        "sandwich" => return Some(sandwich_suite_with(eig_dot)),
        "prop1" => ("prop1", prop1_suite()),
        "prop2" => ("prop2", prop2_suite()),
        "upper_bound" => ("upper_bound", upper_bound_suite()),
        "lap" => ("lap", lap_suite()),
        "sparsemax" => ("sparsemax", sparsemax_suite()),
        "gradients" => ("gradients", gradients_suite()),
        "fig1b" => ("fig1b", fig1b_suite()),
        _ => return None,
    };
    Some(result.map(|o| o.finish(name, start)))
}

struct Outcome {
    cases: usize,
    max_error: f64,
    tolerance: f64,
    /// Extra pass condition beyond `max_error <= tolerance`.
    ok: bool,
}

impl Outcome {
    fn new(tolerance: f64) -> Self {
        Self { cases: 0, max_error: 0.0, tolerance, ok: true }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        self.max_error = if err.is_nan() { f64::INFINITY } else { self.max_error.max(err) };
    }

    fn finish(self, name: &'static str, start: Instant) -> SuiteReport {
        SuiteReport {
            name,
            passed: self.ok && self.max_error <= self.tolerance,
            cases: self.cases,
            max_error: self.max_error,
            tolerance: self.tolerance,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::from_raw(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect())
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    let m = random_matrix(rng, n, n, -1.0, 1.0);
    m.add(&m.transpose()).expect("square").scale(0.5)
}

fn random_gt(rng: &mut ChaCha8Rng, n: usize) -> GroundTruth {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    GroundTruth::new(p).expect("shuffled identity is a bijection")
}

/// `tr(A Y B^T Y^T)` with `Y[i][perm[i]] = 1`.
fn quadratic_term(a: &Tensor, b: &Tensor, perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += a.get(i, j) * b.get(perm[i], perm[j]);
        }
    }
    total
}

/// Exhaustive check that every permutation's quadratic term lies between the
/// min and max eigenvalue dot products computed by `dot`.
pub fn sandwich_suite_with(dot: EigDot) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d);
    let mut out = Outcome::new(1e-9);
    for case in 0..200 {
        let n = 2 + case % 5;
        let (a, b) = (random_symmetric(&mut rng, n), random_symmetric(&mut rng, n));
        let (la, lb) = (sym_eigen(&a)?.values, sym_eigen(&b)?.values);
        let (lo, hi) = (dot(&la, &lb, Sense::Min)?, dot(&la, &lb, Sense::Max)?);
        let mut worst: f64 = 0.0;
        for_each_permutation(n, |p| {
            let q = quadratic_term(&a, &b, p);
            worst = worst.max(lo - q).max(q - hi);
        });
        out.record(worst.max(0.0));
    }
    Ok(out.finish("sandwich", start))
}

/// Batch-hard structured loss against a direct hinge-triplet loop.
fn prop1_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9101);
    let mut out = Outcome::new(1e-12);
    for case in 0..1000 {
        let n = 2 + case % 7;
        let m = [0.0, 0.3, 0.5][case % 3];
        let s = random_matrix(&mut rng, n, n, 0.0, 2.0);
        let gt = random_gt(&mut rng, n);
        let mut triplet = 0.0;
        for i in 0..n {
            let g = gt.as_slice()[i];
            let hardest = (0..n).filter(|&j| j != g).map(|j| s.get(i, j)).fold(f64::INFINITY, f64::min);
            triplet += (s.get(i, g) + m - hardest).max(0.0);
        }
        out.record((batch_hard_lap_loss(&s, &gt, m)? - triplet).abs());
    }
    Ok(out)
}

/// Smoothed batch-hard loss equals `tau` times summed InfoNCE.
fn prop2_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9102);
    let mut out = Outcome::new(1e-10);
    for case in 0..1000 {
        let n = 2 + case % 7;
        let tau = [0.05, 0.5, 1.0][case % 3];
        let s = random_matrix(&mut rng, n, n, 0.0, 2.0);
        let gt = random_gt(&mut rng, n);
        let smoothed = smoothed_batch_hard_loss(&s, &gt, tau)?;
        let nce = tau * infonce_loss(&s, &gt, tau, Reduction::Sum)?;
        out.record((smoothed - nce).abs());
    }
    Ok(out)
}

/// Exact structured QAP loss never exceeds LAP loss minus the eigenvalue bound.
fn upper_bound_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9107);
    let mut out = Outcome::new(1e-9);
    for case in 0..200 {
        let n = 2 + case % 5;
        let za = random_matrix(&mut rng, n, 3, -1.0, 1.0);
        let zb = random_matrix(&mut rng, n, 3, -1.0, 1.0);
        let t = pairwise_distances(&za, &zb, SimilarityMode::Euclidean)?;
        let gt = random_gt(&mut rng, n);
        let exact = structured_qap_loss_exact(&t.inter, &t.intra_a, &t.intra_b, &gt)?;
        let (la, lb) = (sym_eigen(&t.intra_a)?.values, sym_eigen(&t.intra_b)?.values);
        let bound = structured_lap_loss(&t.inter, &gt, 0.0)? - eig_dot(&la, &lb, Sense::Min)?;
        // violation is positive when the bound fails
        out.record((exact - bound).max(0.0));
    }
    Ok(out)
}

/// Hungarian solver against exhaustive enumeration, both senses.
fn lap_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a9);
    let mut out = Outcome::new(0.0);
    for case in 0..500 {
        let n = 1 + case % 8;
        let s = random_matrix(&mut rng, n, n, -5.0, 5.0);
        for sense in [Sense::Min, Sense::Max] {
            let (fast, slow) = (solve_lap(&s, sense)?, brute_force_lap(&s, sense)?);
            out.record((fast.cost - slow.cost).abs());
            out.ok &= fast.perm == slow.perm;
        }
    }
    Ok(out)
}

/// Simplex projection via bisection on the threshold.
fn projection_by_bisection(z: &[f64]) -> Vec<f64> {
    let excess = |t: f64| z.iter().map(|&x| (x - t).max(0.0)).sum::<f64>() - 1.0;
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    z.iter().map(|&x| (x - t).max(0.0)).collect()
}

/// Sparsemax against bisection (1e-10), and the threshold identity (1e-12).
fn sparsemax_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ae);
    let mut out = Outcome::new(1e-10);
    for case in 0..1000 {
        let k = 1 + case % 10;
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = sparsemax(&z);
        let reference = projection_by_bisection(&z);
        let t = sparsemax_threshold(&z);
        let mut err: f64 = 0.0;
        for j in 0..k {
            err = err.max((p[j] - reference[j]).abs());
            out.ok &= (p[j] - (z[j] - t).max(0.0)).abs() <= 1e-12;
        }
        out.record(err);
    }
    Ok(out)
}

type Objective = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

fn gradient_cases() -> Vec<(&'static str, Objective)> {
    let gt = GroundTruth::identity(6);
    let emb = |tape: &mut Tape, x: Var| -> Result<(Var, Var)> {
        let n = tape.value(x).rows();
        let (a, b) = (n / 2, n);
        let rows_a: Vec<usize> = (0..a).collect();
        let rows_b: Vec<usize> = (a..b).collect();
        let sel_a = tape.constant(selector(&rows_a, n));
        let sel_b = tape.constant(selector(&rows_b, n));
        Ok((tape.matmul(sel_a, x)?, tape.matmul(sel_b, x)?))
    };
    let g = gt.clone();
    let mut cases: Vec<(&'static str, Objective)> = vec![
        ("structured_lap", Box::new(move |t: &mut Tape, s: Var| structured_lap_loss_on(t, s, &g, 0.5))),
    ];
    let g = gt.clone();
    cases.push(("batch_hard", Box::new(move |t: &mut Tape, s: Var| batch_hard_lap_loss_on(t, s, &g, 0.5, Reduction::Sum))));
    let g = gt.clone();
    cases.push(("smoothed", Box::new(move |t: &mut Tape, s: Var| smoothed_batch_hard_loss_on(t, s, &g, 0.05, Reduction::Sum))));
    let g = gt.clone();
    cases.push(("infonce", Box::new(move |t: &mut Tape, s: Var| infonce_loss_on(t, s, &g, 0.5, Reduction::Mean))));
    let g = gt.clone();
    cases.push(("nt_logistic", Box::new(move |t: &mut Tape, s: Var| nt_logistic_loss_on(t, s, &g, 0.5, Reduction::Mean))));
    let g = gt.clone();
    cases.push(("sparseclr", Box::new(move |t: &mut Tape, s: Var| sparseclr_loss_on(t, s, &g, Reduction::Sum))));
    for (name, mode) in [("qare_euclidean", SimilarityMode::Euclidean), ("qare_cosine", SimilarityMode::Cosine)] {
        cases.push((
            name,
            Box::new(move |t: &mut Tape, x: Var| {
                let (a, b) = emb(t, x)?;
                let sims = similarities_on(t, a, b, mode)?;
                qare_on(t, sims.intra_a, sims.intra_b, mode)
            }),
        ));
    }
    let g = gt;
    cases.push((
        "combined",
        Box::new(move |t: &mut Tape, x: Var| {
            let (a, b) = emb(t, x)?;
            let sims = similarities_on(t, a, b, SimilarityMode::Cosine)?;
            let p = infonce_loss_on(t, sims.pairwise, &g, 0.5, Reduction::Mean)?;
            let q = qare_on(t, sims.intra_a, sims.intra_b, SimilarityMode::Cosine)?;
            combined_loss_on(t, p, Some(q), 1.0, 1.125, 6)
        }),
    ));
    cases
}

/// `rows.len() x n` 0/1 matrix picking `rows` out of an `n`-row input.
fn selector(rows: &[usize], n: usize) -> Tensor {
    let mut m = Tensor::zeros(rows.len(), n);
    for (k, &r) in rows.iter().enumerate() {
        m.set(k, r, 1.0);
    }
    m
}

/// Every loss through [`gradcheck`] at 20 random points. Pairwise losses take
/// a 6x6 distance matrix; set losses take 12 stacked 4-d embeddings (two views).
fn gradients_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x96ad);
    let mut out = Outcome::new(1e-4);
    for (name, f) in gradient_cases() {
        for _ in 0..20 {
            let x = if name.starts_with("qare") || name == "combined" {
                random_matrix(&mut rng, 12, 4, -1.0, 1.0)
            } else {
                random_matrix(&mut rng, 6, 6, 0.0, 2.0)
            };
            match gradcheck(&f, &x, DEFAULT_EPS) {
                Ok(err) => out.record(err),
                Err(_) => out.record(f64::INFINITY),
            }
        }
    }
    Ok(out)
}

/// The constructed pair: equal LAP optima, separated QAP costs and QARe values.
fn fig1b_suite() -> Result<Outcome> {
    let mut out = Outcome::new(1e-12);
    let [p, q] = fig1b_instance()?;
    let (lp, lq) = (solve_lap(&p.inter, Sense::Min)?, solve_lap(&q.inter, Sense::Min)?);
    out.record((lp.cost - lq.cost).abs());
    let gt = GroundTruth::identity(p.n());
    let ep = structured_qap_loss_exact(&p.inter, &p.intra_a, &p.intra_b, &gt)?;
    let eq = structured_qap_loss_exact(&q.inter, &q.intra_a, &q.intra_b, &gt)?;
    let (rp, rq) = (qare(&p.intra_a, &p.intra_b, p.mode)?, qare(&q.intra_a, &q.intra_b, q.mode)?);
    out.ok = (ep - eq).abs() > 0.1 && (rp - rq).abs() > 1e-6;
    Ok(out)
}
