//! Reverse-mode differentiation tape.
//!
//! A [`Tape`] records each operation as a node holding its value and the ids
//! of its inputs, so nodes are stored in topological order by construction.
//! [`Tape::backward`] walks the nodes in reverse once and returns the
//! gradient of a scalar output with respect to every tracked leaf.
//!
//! Tapes are built fresh for every forward pass and are not meant to be
//! shared across threads.

use crate::error::{Error, Result};
use crate::simgeom::{self, EigenDecomposition};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    RowSum(Var),
    RowMin(Var, Vec<usize>),
    RowMax(Var, Vec<usize>),
    Relu(Var),
    Sqrt(Var),
    Scale(Var, f64),
    RowL2Normalize(Var, Vec<f64>),
    PairwiseDistances { a: Var, b: Var, squared: bool },
    SymEigenvalues { m: Var, eig: EigenDecomposition, ascending: bool },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    degenerate_eigen: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of eigen-decompositions recorded with a near-repeated eigenvalue.
    pub fn degenerate_eigen_count(&self) -> usize {
        self.degenerate_eigen
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v).as_scalar()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => inputs.iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A tracked input; gradients are reported for leaves.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, &[])
    }

    /// An untracked input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, &[])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).mul(self.value(b))?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).exp();
        self.push(out, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).ln();
        self.push(out, Op::Log(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = self.value(a).sum();
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let out = self.value(a).row_sum();
        self.push(out, Op::RowSum(a), &[a])
    }

    /// Per-row minimum; the gradient goes to the first attaining column.
    pub fn row_min(&mut self, a: Var) -> Var {
        let (out, arg) = self.value(a).row_min();
        self.push(out, Op::RowMin(a, arg), &[a])
    }

    /// Per-row maximum; the gradient goes to the first attaining column.
    pub fn row_max(&mut self, a: Var) -> Var {
        let (out, arg) = self.value(a).row_max();
        self.push(out, Op::RowMax(a, arg), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).relu();
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).sqrt();
        self.push(out, Op::Sqrt(a), &[a])
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).scale(k);
        self.push(out, Op::Scale(a, k), &[a])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Adds a constant to every entry.
    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        let c = self.constant(Tensor::scalar(k));
        self.add(a, c)
    }

    pub fn row_l2_normalize(&mut self, a: Var) -> Result<Var> {
        let (out, norms) = self.value(a).row_l2_normalize_with_norms()?;
        Ok(self.push(out, Op::RowL2Normalize(a, norms), &[a]))
    }

    /// `log(1 + exp(x))` element-wise, stable for large `|x|`.
    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        // relu(x) + log(1 + exp(-|x|))
        let pos = self.relu(x);
        let neg_x = self.neg(x);
        let neg = self.relu(neg_x);
        let abs = self.add(pos, neg)?;
        let minus_abs = self.neg(abs);
        let e = self.exp(minus_abs);
        let one_plus = self.add_scalar(e, 1.0)?;
        let l = self.log(one_plus);
        self.add(pos, l)
    }

    /// Row-wise `log(sum_j exp(x_ij))` with max subtraction; returns `n x 1`.
    pub fn row_logsumexp(&mut self, x: Var) -> Result<Var> {
        let m = self.row_max(x);
        let shifted = self.sub(x, m)?;
        let e = self.exp(shifted);
        let s = self.row_sum(e);
        let l = self.log(s);
        self.add(l, m)
    }

    /// Explicit-difference Euclidean distances between the rows of `a` and `b`
    /// (squared when `squared`). Zero distances get a zero subgradient.
    pub fn pairwise_distances(&mut self, a: Var, b: Var, squared: bool) -> Result<Var> {
        let mode = if squared {
            simgeom::SimilarityMode::SquaredEuclidean
        } else {
            simgeom::SimilarityMode::Euclidean
        };
        let out = simgeom::cross_similarity(self.value(a), self.value(b), mode)?;
        Ok(self.push(out, Op::PairwiseDistances { a, b, squared }, &[a, b]))
    }

    /// Eigenvalues of a symmetric matrix as an `n x 1` column, descending
    /// unless `ascending`.
    pub fn sym_eigenvalues(&mut self, m: Var, ascending: bool) -> Result<Var> {
        let eig = simgeom::sym_eigen(self.value(m))?;
        if eig.is_degenerate() {
            self.degenerate_eigen += 1;
        }
        let mut vals = eig.values.clone();
        if ascending {
            vals.reverse();
        }
        let out = Tensor::column(&vals);
        Ok(self.push(out, Op::SymEigenvalues { m, eig, ascending }, &[m]))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut ambiguous_eigen = 0;

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let out = &node.value;
            let mut contributions: Vec<(Var, Tensor)> = Vec::with_capacity(2);
            match &node.op {
                Op::Leaf | Op::Constant => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    contributions.push((*a, g.reduce_to(self.value(*a).shape())));
                    contributions.push((*b, g.reduce_to(self.value(*b).shape())));
                }
                Op::Sub(a, b) => {
                    contributions.push((*a, g.reduce_to(self.value(*a).shape())));
                    contributions.push((*b, g.scale(-1.0).reduce_to(self.value(*b).shape())));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    contributions.push((*a, g.mul(vb)?.reduce_to(va.shape())));
                    contributions.push((*b, g.mul(va)?.reduce_to(vb.shape())));
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    contributions.push((*a, g.matmul(&vb.transpose())?));
                    contributions.push((*b, va.transpose().matmul(&g)?));
                }
                Op::Transpose(a) => contributions.push((*a, g.transpose())),
                Op::Exp(a) => contributions.push((*a, g.mul(out)?)),
                Op::Log(a) => contributions.push((*a, g.div(self.value(*a))?)),
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    contributions.push((*a, Tensor::full(r, c, g.as_scalar()?)));
                }
                Op::RowSum(a) => {
                    let (r, c) = self.value(*a).shape();
                    contributions.push((*a, Tensor::zeros(r, c).add(&g)?));
                }
                Op::RowMin(a, arg) | Op::RowMax(a, arg) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = Tensor::zeros(r, c);
                    for (i, &j) in arg.iter().enumerate() {
                        ga.set(i, j, g.get(i, 0));
                    }
                    contributions.push((*a, ga));
                }
                Op::Relu(a) => {
                    let va = self.value(*a);
                    let mask = va.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    contributions.push((*a, g.mul(&mask)?));
                }
                Op::Sqrt(a) => contributions.push((*a, g.div(&out.scale(2.0))?)),
                Op::Scale(a, k) => contributions.push((*a, g.scale(*k))),
                Op::RowL2Normalize(a, norms) => {
                    let (r, c) = out.shape();
                    let mut ga = Tensor::zeros(r, c);
                    for i in 0..r {
                        let y = out.row(i);
                        let gi = g.row(i);
                        let dot: f64 = y.iter().zip(gi).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            ga.set(i, j, (gi[j] - y[j] * dot) / norms[i]);
                        }
                    }
                    contributions.push((*a, ga));
                }
                Op::PairwiseDistances { a, b, squared } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let e = va.cols();
                    let mut ga = Tensor::zeros(va.rows(), e);
                    let mut gb = Tensor::zeros(vb.rows(), e);
                    for i in 0..va.rows() {
                        for j in 0..vb.rows() {
                            let d = out.get(i, j);
                            let w = if *squared {
                                2.0 * g.get(i, j)
                            } else if d > 0.0 {
                                g.get(i, j) / d
                            } else {
                                0.0
                            };
                            if w == 0.0 {
                                continue;
                            }
                            for k in 0..e {
                                let diff = w * (va.get(i, k) - vb.get(j, k));
                                ga.set(i, k, ga.get(i, k) + diff);
                                gb.set(j, k, gb.get(j, k) - diff);
                            }
                        }
                    }
                    contributions.push((*a, ga));
                    contributions.push((*b, gb));
                }
                Op::SymEigenvalues { m, eig, ascending } => {
                    let mut upstream: Vec<f64> = g.data().to_vec();
                    if *ascending {
                        upstream.reverse();
                    }
                    if simgeom::gradient_is_ambiguous(eig, &upstream) {
                        ambiguous_eigen += 1;
                    }
                    contributions.push((*m, simgeom::eigenvalue_gradient(eig, &upstream)?));
                }
            }
            for (v, gv) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&gv),
                    slot => *slot = Some(gv),
                }
            }
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes, ambiguous_eigen })
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
    ambiguous_eigen: usize,
}

impl Gradients {
    /// Eigenvalue nodes whose gradient fell back to a subgradient (see
    /// [`simgeom::gradient_is_ambiguous`]).
    pub fn ambiguous_eigen_count(&self) -> usize {
        self.ambiguous_eigen
    }

    /// Gradient for `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}
