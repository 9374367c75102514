//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Every reference value is computed here from first principles (Jacobi
//! eigenvalues, permutation enumeration, sort-based simplex projection, naive
//! loss formulas) rather than through the library's own helpers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setclr_cli::commands::{cmd_sweep, cmd_train};
use setclr_core::assignment::{brute_force_lap, solve_lap};
use setclr_core::harness::{fig1b_instance, gen_two_view_dataset, run, SyntheticSpec, TrainConfig};
use setclr_core::losses::{
    batch_hard_lap_loss, batch_hard_lap_loss_on, combined_loss_on, infonce_loss_on, nt_logistic_loss_on, qare,
    qare_on, similarities_on, smoothed_batch_hard_loss, smoothed_batch_hard_loss_on, sparseclr_loss_on, sparsemax,
    sparsemax_threshold, structured_lap_loss, structured_lap_loss_on, structured_qap_loss_exact,
};
use setclr_core::simgeom::{eig_dot, pairwise_distances, sym_eigen};
use setclr_core::{GroundTruth, LossConfig, Reduction, Sense, SimilarityMode, Tape, Tensor, Var};
use std::fs;
use std::time::Instant;

type Mat = Vec<Vec<f64>>;

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Mat {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

fn rand_sym(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = rand_mat(rng, n, n, -1.0, 1.0);
    (0..n).map(|i| (0..n).map(|j| 0.5 * (m[i][j] + m[j][i])).collect()).collect()
}

fn rand_perm(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn tensor(m: &Mat) -> Tensor {
    Tensor::from_rows(m).unwrap()
}

fn rows(t: &Tensor) -> Mat {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

fn gt(p: &[usize]) -> GroundTruth {
    GroundTruth::new(p.to_vec()).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Cyclic Jacobi; eigenvalues ascending.
fn eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.len();
    let mut a = m.clone();
    let total: f64 = a.iter().flatten().map(|x| x * x).sum();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off <= 1e-32 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = c * pk - s * qk;
                    a[q][k] = s * pk + c * qk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rearrangement bounds: (opposite order, same order).
fn eig_bounds(a: &Mat, b: &Mat) -> (f64, f64) {
    let (la, lb) = (eigenvalues(a), eigenvalues(b));
    let lo = la.iter().zip(lb.iter().rev()).map(|(x, y)| x * y).sum();
    let hi = la.iter().zip(&lb).map(|(x, y)| x * y).sum();
    (lo, hi)
}

fn lin(s: &Mat, p: &[usize]) -> f64 {
    p.iter().enumerate().map(|(i, &j)| s[i][j]).sum()
}

fn quad(a: &Mat, b: &Mat, p: &[usize]) -> f64 {
    let n = p.len();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i][j] * b[p[i]][p[j]]).sum()
}

fn lap_min(s: &Mat) -> f64 {
    permutations(s.len()).iter().map(|p| lin(s, p)).fold(f64::INFINITY, f64::min)
}

fn lse(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn projection(z: &[f64]) -> Vec<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut k, mut k_sum) = (0.0, 0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        if 1.0 + (i + 1) as f64 * x > cum {
            k = i + 1;
            k_sum = cum;
        }
    }
    let t = (k_sum - 1.0) / k as f64;
    z.iter().map(|&x| (x - t).max(0.0)).collect()
}

fn dist2(p: &[f64], z: &[f64]) -> f64 {
    p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn euclid_intra(z: &Mat) -> Mat {
    z.iter().map(|a| z.iter().map(|b| dist2(a, b).sqrt()).collect()).collect()
}

fn normalize(z: &Mat) -> Mat {
    z.iter()
        .map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|x| x / n).collect()
        })
        .collect()
}

fn gram(a: &Mat, b: &Mat) -> Mat {
    a.iter().map(|x| b.iter().map(|y| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect()).collect()
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
    start: Instant,
}

impl Check {
    fn start(name: &'static str) -> Self {
        Self { name, ok: true, detail: String::new(), start: Instant::now() }
    }

    fn report(self, budget_secs: Option<f64>) -> bool {
        let secs = self.start.elapsed().as_secs_f64();
        let in_time = budget_secs.is_none_or(|b| secs < b);
        let ok = self.ok && in_time;
        let budget = budget_secs.map_or(String::new(), |b| format!(" budget={b}s"));
        println!("{} {}: {} ({secs:.2}s{budget})", if ok { "PASS" } else { "FAIL" }, self.name, self.detail);
        ok
    }
}

fn sandwich() -> bool {
    let mut c = Check::start("sandwich bound");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut eig_err) = (f64::NEG_INFINITY, 0.0f64);
    for case in 0..200 {
        let n = 2 + case % 5;
        let (a, b) = (rand_sym(&mut rng, n), rand_sym(&mut rng, n));
        let (la, lb) = (sym_eigen(&tensor(&a)).unwrap().values, sym_eigen(&tensor(&b)).unwrap().values);
        let (lo, hi) = (eig_dot(&la, &lb, Sense::Min).unwrap(), eig_dot(&la, &lb, Sense::Max).unwrap());
        let (rlo, rhi) = eig_bounds(&a, &b);
        eig_err = eig_err.max((lo - rlo).abs()).max((hi - rhi).abs());
        for p in permutations(n) {
            let q = quad(&a, &b, &p);
            worst = worst.max(lo - q).max(q - hi);
        }
    }
    c.ok = worst <= 1e-9 && eig_err <= 1e-9;
    c.detail = format!("200 pairs, largest bound excess {worst:.3e} (tol 1e-9), eig_dot vs Jacobi {eig_err:.3e}");
    c.report(Some(30.0))
}

fn prop1() -> bool {
    let mut c = Check::start("prop1 batch-hard = triplet");
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut err = 0.0f64;
    for case in 0..1000 {
        let n = 2 + case % 7;
        let m = [0.0, 0.3, 0.5][case % 3];
        let s = rand_mat(&mut rng, n, n, -1.0, 2.0);
        let p = rand_perm(&mut rng, n);
        let mut triplet = 0.0;
        for i in 0..n {
            let hardest = (0..n).filter(|&j| j != p[i]).map(|j| s[i][j]).fold(f64::INFINITY, f64::min);
            triplet += (s[i][p[i]] + m - hardest).max(0.0);
        }
        err = err.max((batch_hard_lap_loss(&tensor(&s), &gt(&p), m).unwrap() - triplet).abs());
    }
    c.ok = err <= 1e-12;
    c.detail = format!("1000 instances, max |diff| {err:.3e} (tol 1e-12)");
    c.report(Some(10.0))
}

fn prop2() -> bool {
    let mut c = Check::start("prop2 smoothed = tau * InfoNCE");
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut err = 0.0f64;
    for case in 0..1000 {
        let n = 2 + case % 7;
        let tau = [0.05, 0.5, 1.0][case % 3];
        let s = rand_mat(&mut rng, n, n, 0.0, 2.0);
        let p = rand_perm(&mut rng, n);
        let nce: f64 = (0..n)
            .map(|i| {
                let log_z = lse(s[i].iter().map(|x| -x / tau));
                -(-s[i][p[i]] / tau - log_z)
            })
            .sum();
        err = err.max((smoothed_batch_hard_loss(&tensor(&s), &gt(&p), tau).unwrap() - tau * nce).abs());
    }
    c.ok = err <= 1e-10;
    c.detail = format!("1000 instances, max |diff| {err:.3e} (tol 1e-10)");
    c.report(Some(10.0))
}

fn upper_bound() -> bool {
    let mut c = Check::start("QAP upper bound");
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut slack, mut ref_err) = (f64::INFINITY, 0.0f64);
    for case in 0..200 {
        let n = 2 + case % 5;
        let za = rand_mat(&mut rng, n, 3, -1.0, 1.0);
        let zb = rand_mat(&mut rng, n, 3, -1.0, 1.0);
        let p = rand_perm(&mut rng, n);
        let t = pairwise_distances(&tensor(&za), &tensor(&zb), SimilarityMode::Euclidean).unwrap();
        let g = gt(&p);
        let exact = structured_qap_loss_exact(&t.inter, &t.intra_a, &t.intra_b, &g).unwrap();
        let (la, lb) = (sym_eigen(&t.intra_a).unwrap().values, sym_eigen(&t.intra_b).unwrap().values);
        let lap = structured_lap_loss(&t.inter, &g, 0.0).unwrap();
        let bound = lap - eig_dot(&la, &lb, Sense::Min).unwrap();
        slack = slack.min(bound - exact);

        let s: Mat = za.iter().map(|a| zb.iter().map(|b| dist2(a, b).sqrt()).collect()).collect();
        let (sa, sb) = (euclid_intra(&za), euclid_intra(&zb));
        let qap_min = permutations(n).iter().map(|q| lin(&s, q) + quad(&sa, &sb, q)).fold(f64::INFINITY, f64::min);
        let ref_exact = lin(&s, &p) - qap_min;
        let ref_lap = lin(&s, &p) - lap_min(&s);
        ref_err = ref_err.max((exact - ref_exact).abs()).max((lap - ref_lap).abs());
    }
    c.ok = slack >= -1e-9 && ref_err <= 1e-9;
    c.detail = format!("200 triples, min slack {slack:.3e} (>= -1e-9), library vs enumeration {ref_err:.3e}");
    c.report(Some(60.0))
}

fn lap() -> bool {
    let mut c = Check::start("LAP exactness");
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut mismatches, mut ref_err) = (0, 0.0f64);
    for case in 0..500 {
        let n = 1 + case % 8;
        let s = rand_mat(&mut rng, n, n, -5.0, 5.0);
        let t = tensor(&s);
        for sense in [Sense::Min, Sense::Max] {
            let (fast, slow) = (solve_lap(&t, sense).unwrap(), brute_force_lap(&t, sense).unwrap());
            if fast.cost != slow.cost {
                mismatches += 1;
            }
            let costs = permutations(n).into_iter().map(|p| lin(&s, &p));
            let best = match sense {
                Sense::Min => costs.fold(f64::INFINITY, f64::min),
                Sense::Max => costs.fold(f64::NEG_INFINITY, f64::max),
            };
            ref_err = ref_err.max((fast.cost - best).abs());
        }
    }
    c.ok = mismatches == 0 && ref_err <= 1e-12;
    c.detail = format!("1000 solves, {mismatches} cost mismatches vs brute force, enumeration error {ref_err:.3e}");
    c.report(Some(30.0))
}

fn sparsemax_check() -> bool {
    let mut c = Check::start("sparsemax");
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    // the closed form must beat every feasible grid point for K <= 3
    let mut grid_gap = f64::NEG_INFINITY;
    for k in 1..=3usize {
        for _ in 0..20 {
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
            let p = projection(&z);
            let steps = if k == 3 { 400 } else { 20000 };
            let mut best = f64::INFINITY;
            match k {
                1 => best = dist2(&[1.0], &z),
                2 => {
                    for i in 0..=steps {
                        let a = i as f64 / steps as f64;
                        best = best.min(dist2(&[a, 1.0 - a], &z));
                    }
                }
                _ => {
                    for i in 0..=steps {
                        for j in 0..=steps - i {
                            let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                            best = best.min(dist2(&[a, b, 1.0 - a - b], &z));
                        }
                    }
                }
            }
            let feasible = (p.iter().sum::<f64>() - 1.0).abs() < 1e-12 && p.iter().all(|&x| x >= 0.0);
            grid_gap = grid_gap.max(if feasible { dist2(&p, &z) - best } else { f64::INFINITY });
        }
    }
    let (mut err, mut ident) = (0.0f64, 0.0f64);
    for case in 0..1000 {
        let k = 1 + case % 12;
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (p, reference, t) = (sparsemax(&z), projection(&z), sparsemax_threshold(&z));
        for j in 0..k {
            err = err.max((p[j] - reference[j]).abs());
            ident = ident.max((p[j] - (z[j] - t).max(0.0)).abs());
        }
    }
    c.ok = grid_gap <= 1e-12 && err <= 1e-10 && ident <= 1e-12;
    c.detail = format!(
        "oracle vs grid {grid_gap:.3e}, 1000 vectors max error {err:.3e} (tol 1e-10), threshold identity {ident:.3e} (tol 1e-12)"
    );
    c.report(None)
}

enum Input {
    Scores(Mat),
    Pair(Mat, Mat),
}

type Analytic = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;
type Reference = Box<dyn Fn(&[Mat]) -> f64>;

fn reference_sparseclr(s: &Mat, p: &[usize]) -> f64 {
    (0..s.len())
        .map(|i| {
            let z: Vec<f64> = s[i].iter().map(|x| -x).collect();
            let q = projection(&z);
            let support: Vec<usize> = (0..z.len()).filter(|&j| q[j] > 0.0).collect();
            let t = (support.iter().map(|&j| z[j]).sum::<f64>() - 1.0) / support.len() as f64;
            s[i][p[i]] - 0.5 * support.iter().map(|&j| s[i][j] * s[i][j] - t * t).sum::<f64>()
        })
        .sum()
}

fn reference_qare(a: &Mat, b: &Mat, mode: SimilarityMode) -> f64 {
    if mode.is_distance() {
        let (lo, _) = eig_bounds(&euclid_intra(a), &euclid_intra(b));
        -lo
    } else {
        let shift = |m: &Mat| m.iter().map(|r| r.iter().map(|x| x + 1.0).collect()).collect::<Mat>();
        let (na, nb) = (normalize(a), normalize(b));
        eig_bounds(&shift(&gram(&na, &na)), &shift(&gram(&nb, &nb))).1
    }
}

fn reference_infonce_mean(s: &Mat, p: &[usize], tau: f64) -> f64 {
    (0..s.len()).map(|i| s[i][p[i]] / tau + lse(s[i].iter().map(|x| -x / tau))).sum::<f64>() / s.len() as f64
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn gradient_cases(p: Vec<usize>) -> Vec<(&'static str, bool, Analytic, Reference)> {
    let g = gt(&p);
    let n = p.len();
    let mut cases: Vec<(&'static str, bool, Analytic, Reference)> = Vec::new();
    macro_rules! scores {
        ($name:expr, $lib:expr, $reference:expr) => {{
            let (g, p) = (g.clone(), p.clone());
            let lib = $lib;
            let reference = $reference;
            cases.push((
                $name,
                false,
                Box::new(move |t: &mut Tape, v: &[Var]| lib(t, v[0], &g).unwrap()),
                Box::new(move |x: &[Mat]| reference(&x[0], &p)),
            ));
        }};
    }
    scores!(
        "structured LAP",
        |t: &mut Tape, s, g: &GroundTruth| structured_lap_loss_on(t, s, g, 0.5),
        |s: &Mat, p: &[usize]| {
            let n = s.len();
            let sm: Mat = (0..n).map(|i| (0..n).map(|j| s[i][j] + if j == p[i] { 0.5 } else { 0.0 }).collect()).collect();
            lin(&sm, p) - lap_min(&sm)
        }
    );
    scores!(
        "batch-hard",
        |t: &mut Tape, s, g: &GroundTruth| batch_hard_lap_loss_on(t, s, g, 0.5, Reduction::Sum),
        |s: &Mat, p: &[usize]| (0..s.len())
            .map(|i| {
                let hard = (0..s.len()).filter(|&j| j != p[i]).map(|j| s[i][j]).fold(f64::INFINITY, f64::min);
                (s[i][p[i]] + 0.5 - hard).max(0.0)
            })
            .sum::<f64>()
    );
    scores!(
        "smoothed",
        |t: &mut Tape, s, g: &GroundTruth| smoothed_batch_hard_loss_on(t, s, g, 0.1, Reduction::Sum),
        |s: &Mat, p: &[usize]| (0..s.len()).map(|i| s[i][p[i]] + 0.1 * lse(s[i].iter().map(|x| -x / 0.1))).sum::<f64>()
    );
    scores!(
        "InfoNCE",
        |t: &mut Tape, s, g: &GroundTruth| infonce_loss_on(t, s, g, 0.5, Reduction::Mean),
        |s: &Mat, p: &[usize]| reference_infonce_mean(s, p, 0.5)
    );
    scores!(
        "NT-Logistic",
        |t: &mut Tape, s, g: &GroundTruth| nt_logistic_loss_on(t, s, g, 0.5, Reduction::Mean),
        |s: &Mat, p: &[usize]| (0..s.len())
            .map(|i| {
                let hard = (0..s.len()).filter(|&j| j != p[i]).map(|j| s[i][j]).fold(f64::INFINITY, f64::min);
                softplus(s[i][p[i]] / 0.5) + softplus(-hard / 0.5)
            })
            .sum::<f64>()
            / s.len() as f64
    );
    scores!(
        "SparseCLR",
        |t: &mut Tape, s, g: &GroundTruth| sparseclr_loss_on(t, s, g, Reduction::Sum),
        |s: &Mat, p: &[usize]| reference_sparseclr(s, p)
    );
    for (name, mode) in [("QARe euclidean", SimilarityMode::Euclidean), ("QARe cosine", SimilarityMode::Cosine)] {
        cases.push((
            name,
            true,
            Box::new(move |t: &mut Tape, v: &[Var]| {
                let sims = similarities_on(t, v[0], v[1], mode).unwrap();
                qare_on(t, sims.intra_a, sims.intra_b, mode).unwrap()
            }),
            Box::new(move |x: &[Mat]| reference_qare(&x[0], &x[1], mode)),
        ));
    }
    let (alpha, beta) = (1.0, 1.5);
    cases.push((
        "combined",
        true,
        Box::new(move |t: &mut Tape, v: &[Var]| {
            let sims = similarities_on(t, v[0], v[1], SimilarityMode::Cosine).unwrap();
            let pw = infonce_loss_on(t, sims.pairwise, &g, 0.5, Reduction::Mean).unwrap();
            let q = qare_on(t, sims.intra_a, sims.intra_b, SimilarityMode::Cosine).unwrap();
            combined_loss_on(t, pw, Some(q), alpha, beta, n).unwrap()
        }),
        Box::new(move |x: &[Mat]| {
            let s: Mat = gram(&normalize(&x[0]), &normalize(&x[1])).into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect();
            alpha * reference_infonce_mean(&s, &p, 0.5)
                + beta * reference_qare(&x[0], &x[1], SimilarityMode::Cosine) / (n * n) as f64
        }),
    ));
    cases
}

fn gradients() -> bool {
    let mut c = Check::start("gradient suite");
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let eps = 1e-6;
    let mut summary = Vec::new();
    for case_idx in 0..9 {
        let mut worst = 0.0f64;
        let mut name = "";
        for _ in 0..20 {
            let p = rand_perm(&mut rng, 6);
            let (case_name, pair, analytic, reference) = gradient_cases(p).swap_remove(case_idx);
            name = case_name;
            let input = if pair {
                Input::Pair(rand_mat(&mut rng, 6, 4, -1.0, 1.0), rand_mat(&mut rng, 6, 4, -1.0, 1.0))
            } else {
                Input::Scores(rand_mat(&mut rng, 6, 6, 0.0, 2.0))
            };
            let xs = match input {
                Input::Scores(s) => vec![s],
                Input::Pair(a, b) => vec![a, b],
            };
            let mut tape = Tape::new();
            let leaves: Vec<Var> = xs.iter().map(|x| tape.leaf(tensor(x))).collect();
            let out = analytic(&mut tape, &leaves);
            let value = tape.scalar(out).unwrap();
            worst = worst.max((value - reference(&xs)).abs() / value.abs().max(1.0));
            let grads = tape.backward(out).unwrap();
            for (k, leaf) in leaves.iter().enumerate() {
                let a = grads.get(*leaf);
                for r in 0..xs[k].len() {
                    for col in 0..xs[k][r].len() {
                        let mut plus = xs.clone();
                        plus[k][r][col] += eps;
                        let mut minus = xs.clone();
                        minus[k][r][col] -= eps;
                        let numeric = (reference(&plus) - reference(&minus)) / (2.0 * eps);
                        let an = a.get(r, col);
                        let rel = (an - numeric).abs() / an.abs().max(1.0);
                        worst = if rel.is_nan() { f64::INFINITY } else { worst.max(rel) };
                    }
                }
            }
        }
        c.ok &= worst <= 1e-4;
        summary.push(format!("{name} {worst:.1e}"));
    }
    c.detail = format!("20 points each, max relative error (tol 1e-4): {}", summary.join(", "));
    c.report(Some(120.0))
}

fn fig1b() -> bool {
    let mut c = Check::start("fig1b discriminability");
    let [p, q] = fig1b_instance().unwrap();
    let n = p.n();
    let g = GroundTruth::identity(n);
    let id: Vec<usize> = (0..n).collect();
    let lap_p = solve_lap(&p.inter, Sense::Min).unwrap().cost;
    let lap_q = solve_lap(&q.inter, Sense::Min).unwrap().cost;
    let exact_p = structured_qap_loss_exact(&p.inter, &p.intra_a, &p.intra_b, &g).unwrap();
    let exact_q = structured_qap_loss_exact(&q.inter, &q.intra_a, &q.intra_b, &g).unwrap();
    let (qp, qq) = (qare(&p.intra_a, &p.intra_b, p.mode).unwrap(), qare(&q.intra_a, &q.intra_b, q.mode).unwrap());

    let reference = |t: &setclr_core::SimilarityTriple| {
        let (s, a, b) = (rows(&t.inter), rows(&t.intra_a), rows(&t.intra_b));
        let qap_min = permutations(n).iter().map(|y| lin(&s, y) + quad(&a, &b, y)).fold(f64::INFINITY, f64::min);
        (lap_min(&s), lin(&s, &id) - qap_min, -eig_bounds(&a, &b).0)
    };
    let (rp, rq) = (reference(&p), reference(&q));
    let ref_err = [lap_p - rp.0, lap_q - rq.0, exact_p - rp.1, exact_q - rq.1, qp - rp.2, qq - rq.2]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    c.ok = p.mode.is_distance()
        && (lap_p - lap_q).abs() <= 1e-12
        && (exact_p - exact_q).abs() > 0.1 && (qp - qq).abs() > 1e-6 && ref_err <= 1e-9;
    c.detail = format!(
        "LAP optima differ by {:.1e}, exact QAP losses {exact_p:.4} vs {exact_q:.4}, qare {qp:.4} vs {qq:.4}, reference error {ref_err:.1e}",
        (lap_p - lap_q).abs()
    );
    c.report(None)
}

fn desk_scale() -> bool {
    let mut c = Check::start("desk-scale direction");
    let spec = SyntheticSpec::default();
    let data = gen_two_view_dataset(&spec).unwrap();
    let baseline = 1.0 / data.len() as f64;
    let mean_acc = |beta: f64| {
        let accs: Vec<f64> = (0..5u64)
            .map(|seed| {
                let cfg = TrainConfig { loss: LossConfig { beta, ..LossConfig::default() }, seed, ..TrainConfig::default() };
                run(&data, &cfg).unwrap().1.final_matching_acc
            })
            .collect();
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    let (plain, with_qare) = (mean_acc(0.0), mean_acc(1.0));
    c.ok = with_qare >= plain - 0.02 && plain >= 10.0 * baseline && with_qare >= 10.0 * baseline;
    c.detail = format!(
        "seeds 0-4, InfoNCE {plain:.4}, InfoNCE+QARe {with_qare:.4}, signed gap {:+.4}, baseline 1/N = {baseline:.4}",
        with_qare - plain
    );
    c.report(Some(300.0))
}

const SWEEP_CONFIG: &str = r#"
seeds = [0, 1, 2]

[[losses]]
name = "infonce"
loss = { kind = "infonce", tau = 0.05, beta = 0.0 }
"#;

fn beta_sweep() -> bool {
    let mut c = Check::start("beta sweep");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.toml");
    fs::write(&cfg, SWEEP_CONFIG).unwrap();
    let sweep_dir = cmd_sweep(&cfg, Some(tmp.path().join("sweep")), None, false).unwrap();
    let train_dir = cmd_train(&cfg, Some(tmp.path().join("train")), false).unwrap();
    let sweep = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let history = fs::read_to_string(train_dir.join("history.csv")).unwrap();

    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    let betas: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    let distinct = betas.iter().collect::<std::collections::BTreeSet<_>>().len();
    let epochs = TrainConfig::default().epochs;
    let mut mismatched = 0;
    for seed in 0..3 {
        let last = history.lines().find(|l| l.starts_with(&format!("{seed},infonce,{epochs},"))).unwrap_or("");
        let accs: Vec<&str> = last.split(',').skip(4).collect();
        if rows.get(seed).copied() != Some(format!("0,{seed},{}", accs.join(",")).as_str()) {
            mismatched += 1;
        }
    }
    c.ok = rows.len() == 16 * 3 && distinct == 16 && mismatched == 0;
    c.detail = format!("{} rows over {distinct} beta values and 3 seeds, {mismatched} beta=0 rows differing from train", rows.len());
    c.report(None)
}

fn main() {
    let checks: [fn() -> bool; 10] =
        [sandwich, prop1, prop2, upper_bound, lap, sparsemax_check, gradients, fig1b, desk_scale, beta_sweep];
    let failed = checks.iter().filter(|check| !check()).count();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
